use serde::{Deserialize, Serialize};

use crate::dataset::{majority_vote, Dataset, TiePolicy};
use crate::error::{Error, Result};

/// Percent agreement between annotator pairs and with the majority vote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAgreement {
    /// K×K, symmetric, in percent; the diagonal is `None`.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub grand_mean: f64,
    /// Percent of examples on which each annotator matches the majority vote.
    pub majority_agreement: Vec<f64>,
    pub mean_majority_agreement: f64,
}

pub fn pairwise_agreement(dataset: &Dataset) -> Result<PairwiseAgreement> {
    let k = dataset.num_annotators();
    if k < 2 {
        return Err(Error::Schema("pairwise agreement needs at least two annotators".into()));
    }
    if dataset.is_empty() {
        return Err(Error::Schema("pairwise agreement needs at least one example".into()));
    }
    let n = dataset.len() as f64;
    let mut same = vec![vec![0usize; k]; k];
    let mut with_majority = vec![0usize; k];
    for ex in dataset.examples() {
        let labels = &ex.annotator_labels;
        let gold = majority_vote(labels, TiePolicy::Error)?;
        for i in 0..k {
            with_majority[i] += usize::from(labels[i] == gold.label);
            for j in (i + 1)..k {
                same[i][j] += usize::from(labels[i] == labels[j]);
            }
        }
    }
    let mut matrix = vec![vec![None; k]; k];
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let pct = 100.0 * same[i][j] as f64 / n;
            matrix[i][j] = Some(pct);
            matrix[j][i] = Some(pct);
            total += pct;
        }
    }
    let majority_agreement: Vec<f64> = with_majority.iter().map(|&c| 100.0 * c as f64 / n).collect();
    let mean_majority_agreement = majority_agreement.iter().sum::<f64>() / k as f64;
    Ok(PairwiseAgreement {
        matrix,
        grand_mean: total / (k * (k - 1) / 2) as f64,
        majority_agreement,
        mean_majority_agreement,
    })
}
