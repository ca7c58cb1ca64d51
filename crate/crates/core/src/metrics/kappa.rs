use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Cohen's κ for two binary raters: (p_o − p_e) / (1 − p_e).
///
/// When chance agreement is total (both raters constant on the same class) κ is 1.
pub fn cohens_kappa(a: &[Label], b: &[Label]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Schema(format!(
            "kappa needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Schema("kappa needs at least one rating".into()));
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let mut a_pos = 0usize;
    let mut b_pos = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        agree += usize::from(x == y);
        a_pos += usize::from(x == 1);
        b_pos += usize::from(y == 1);
    }
    let p_o = agree as f64 / n;
    let (pa, pb) = (a_pos as f64 / n, b_pos as f64 / n);
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    if p_e >= 1.0 {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    pub thresholds: Vec<f64>,
    /// `kappa[t][k]`: κ between the thresholded model and annotator `k` at threshold `t`.
    pub kappa_vs_each_annotator: Vec<Vec<f64>>,
    pub mean_kappa: Vec<f64>,
}

impl KappaSweep {
    pub fn max_mean_kappa(&self) -> Option<(f64, f64)> {
        self.thresholds
            .iter()
            .zip(&self.mean_kappa)
            .map(|(&t, &k)| (t, k))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn annotator_column(annotations: &[Vec<Label>], k: usize) -> Vec<Label> {
    annotations.iter().map(|row| row[k]).collect()
}

fn num_annotators(annotations: &[Vec<Label>]) -> Result<usize> {
    let k = annotations.first().map_or(0, Vec::len);
    if annotations.iter().any(|row| row.len() != k) {
        return Err(Error::Schema("annotation rows have differing lengths".into()));
    }
    Ok(k)
}

/// Treats the model as one more rater: label 1 iff `score > τ`, compared with every annotator.
pub fn kappa_sweep(scores: &[f64], annotations: &[Vec<Label>], thresholds: &[f64]) -> Result<KappaSweep> {
    if scores.len() != annotations.len() {
        return Err(Error::Schema(format!(
            "{} scores for {} annotated examples",
            scores.len(),
            annotations.len()
        )));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::Range(format!("threshold {t} outside (0, 1)")));
    }
    let k = num_annotators(annotations)?;
    let columns: Vec<Vec<Label>> = (0..k).map(|j| annotator_column(annotations, j)).collect();
    let mut table = Vec::with_capacity(thresholds.len());
    let mut means = Vec::with_capacity(thresholds.len());
    for &tau in thresholds {
        let model: Vec<Label> = scores.iter().map(|&s| Label::from(s > tau)).collect();
        let row = columns
            .iter()
            .map(|col| cohens_kappa(&model, col))
            .collect::<Result<Vec<_>>>()?;
        means.push(row.iter().sum::<f64>() / k.max(1) as f64);
        table.push(row);
    }
    Ok(KappaSweep {
        thresholds: thresholds.to_vec(),
        kappa_vs_each_annotator: table,
        mean_kappa: means,
    })
}

/// Human reference lines: κ between every annotator pair, each annotator's mean
/// against the others, and the mean over all pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorKappaReference {
    pub pairwise: Vec<Vec<Option<f64>>>,
    pub per_annotator_mean: Vec<f64>,
    pub mean_over_pairs: f64,
}

pub fn annotator_kappa_reference(annotations: &[Vec<Label>]) -> Result<AnnotatorKappaReference> {
    let k = num_annotators(annotations)?;
    if k < 2 {
        return Err(Error::Schema("need at least two annotators".into()));
    }
    let columns: Vec<Vec<Label>> = (0..k).map(|j| annotator_column(annotations, j)).collect();
    let mut pairwise = vec![vec![None; k]; k];
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let kappa = cohens_kappa(&columns[i], &columns[j])?;
            pairwise[i][j] = Some(kappa);
            pairwise[j][i] = Some(kappa);
            total += kappa;
        }
    }
    let per_annotator_mean = pairwise
        .iter()
        .map(|row| row.iter().flatten().sum::<f64>() / (k - 1) as f64)
        .collect();
    Ok(AnnotatorKappaReference {
        pairwise,
        per_annotator_mean,
        mean_over_pairs: total / (k * (k - 1) / 2) as f64,
    })
}
