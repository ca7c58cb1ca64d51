use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::difficulty::Level;
use crate::error::{Error, Result};

/// Area under the ROC curve via the Mann–Whitney rank-sum formulation.
///
/// Tied scores receive the average of the ranks they span, so each tied
/// positive/negative pair contributes one half.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Schema(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score passed to roc_auc".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateClass(format!(
            "AUC needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks are 1-based: the run covers ranks start+1 ..= end
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_run = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum_pos += avg_rank * pos_in_run as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub overall: f64,
    /// Strata that lack one of the two classes are absent.
    pub per_stratum: BTreeMap<Level, f64>,
}

/// Overall AUC plus one AUC per difficulty stratum of the test set.
pub fn stratified_auc(scores: &[f64], labels: &[Label], strata: &[Level]) -> Result<AucResult> {
    if strata.len() != scores.len() {
        return Err(Error::Schema(format!(
            "{} strata for {} scores",
            strata.len(),
            scores.len()
        )));
    }
    let overall = roc_auc(scores, labels)?;
    let mut groups: BTreeMap<Level, (Vec<f64>, Vec<Label>)> = BTreeMap::new();
    for ((&s, &l), &level) in scores.iter().zip(labels).zip(strata) {
        let entry = groups.entry(level).or_default();
        entry.0.push(s);
        entry.1.push(l);
    }
    let mut per_stratum = BTreeMap::new();
    for (level, (s, l)) in groups {
        match roc_auc(&s, &l) {
            Ok(auc) => {
                per_stratum.insert(level, auc);
            }
            Err(Error::DegenerateClass(msg)) => {
                log::warn!("stratum {level:?} omitted from AUC: {msg}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(AucResult { overall, per_stratum })
}
