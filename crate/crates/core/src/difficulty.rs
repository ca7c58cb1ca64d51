//! Difficulty bins from annotator agreement, direct scores, or model confidence.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TiePolicy};
use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, NoEval, Trainer, TrainingData};

/// Difficulty level, ordered from easiest to hardest.
///
/// Coarse assignments use only `Easy` and `Hard`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    VeryEasy,
    Easy,
    Hard,
    VeryHard,
}

impl Level {
    pub const FINE: [Level; 4] = [Level::VeryEasy, Level::Easy, Level::Hard, Level::VeryHard];
    pub const COARSE: [Level; 2] = [Level::Easy, Level::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Level::VeryEasy => "very_easy",
            Level::Easy => "easy",
            Level::Hard => "hard",
            Level::VeryHard => "very_hard",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Level::FINE
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown difficulty level `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Fine,
    Coarse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Agreement,
    Direct,
    SelfTaught,
    Transfer,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyBin {
    pub level: Level,
    pub source: ScoreSource,
}

/// Difficulty level of every example of one training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifficultyAssignment {
    pub granularity: Granularity,
    pub source: ScoreSource,
    levels: BTreeMap<String, Level>,
}

impl DifficultyAssignment {
    pub fn new(granularity: Granularity, source: ScoreSource, levels: BTreeMap<String, Level>) -> Result<Self> {
        if granularity == Granularity::Coarse {
            if let Some((id, level)) = levels.iter().find(|(_, l)| !Level::COARSE.contains(l)) {
                return Err(Error::Granularity(format!(
                    "coarse assignment cannot hold level {level} (example `{id}`)"
                )));
            }
        }
        Ok(Self {
            granularity,
            source,
            levels,
        })
    }

    pub fn levels(&self) -> &BTreeMap<String, Level> {
        &self.levels
    }

    pub fn get(&self, id: &str) -> Option<DifficultyBin> {
        self.levels.get(id).map(|&level| DifficultyBin {
            level,
            source: self.source,
        })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Ids at `level`, in id order.
    pub fn ids_at(&self, level: Level) -> Vec<&str> {
        self.levels
            .iter()
            .filter(|(_, &l)| l == level)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn bin_sizes(&self) -> BTreeMap<Level, usize> {
        let mut sizes = BTreeMap::new();
        for &l in self.levels.values() {
            *sizes.entry(l).or_insert(0) += 1;
        }
        sizes
    }

    /// One `{id, level, source}` object per line.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for (id, level) in &self.levels {
            let row = serde_json::json!({ "id": id, "level": level, "source": self.source });
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead, granularity: Granularity) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            id: String,
            level: Level,
            source: ScoreSource,
        }
        let mut levels = BTreeMap::new();
        let mut source = None;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if *source.get_or_insert(row.source) != row.source {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "mixed sources in one assignment".into(),
                });
            }
            if levels.insert(row.id.clone(), row.level).is_some() {
                return Err(Error::DuplicateId(row.id));
            }
        }
        Self::new(granularity, source.unwrap_or(ScoreSource::Agreement), levels)
    }
}

/// Per-example probability of the gold class under a proxy model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceScore {
    pub source: ScoreSource,
    pub scores: BTreeMap<String, f64>,
}

/// Agreement count → fine level for K = 7; counts 7, 6, 5, 4 map to very easy … very hard.
fn fine_level(count: usize) -> Level {
    match count {
        7 => Level::VeryEasy,
        6 => Level::Easy,
        5 => Level::Hard,
        _ => Level::VeryHard,
    }
}

/// Coarse level: easy iff the count lies in the upper half of the achievable majority
/// counts (for K = 7: {6, 7} easy, {4, 5} hard).
fn coarse_level(count: usize, k: usize) -> Level {
    let min = k / 2 + 1;
    if 2 * count > min + k {
        Level::Easy
    } else {
        Level::Hard
    }
}

/// Bins examples by how many annotators voted for the majority label.
///
/// Fine granularity is defined only for seven annotators.
pub fn bin_by_agreement(dataset: &Dataset, granularity: Granularity) -> Result<DifficultyAssignment> {
    let k = dataset.num_annotators();
    if granularity == Granularity::Fine && k != 7 {
        let achievable = k - k / 2;
        return Err(Error::Granularity(format!(
            "four agreement levels need K = 7; K = {k} gives {achievable} achievable majority counts"
        )));
    }
    let gold = dataset.gold_labels(TiePolicy::Error)?;
    let levels = dataset
        .examples()
        .iter()
        .zip(&gold)
        .map(|(ex, g)| {
            let level = match granularity {
                Granularity::Fine => fine_level(g.agreement_count),
                Granularity::Coarse => coarse_level(g.agreement_count, k),
            };
            (ex.id.clone(), level)
        })
        .collect();
    DifficultyAssignment::new(granularity, ScoreSource::Agreement, levels)
}

/// Bins examples by their direct 1–4 difficulty score.
pub fn bin_by_direct_annotation(dataset: &Dataset) -> Result<DifficultyAssignment> {
    let mut levels = BTreeMap::new();
    let mut offending = Vec::new();
    for ex in dataset.examples() {
        match ex.direct_difficulty {
            Some(d @ 1..=4) => {
                levels.insert(ex.id.clone(), Level::FINE[usize::from(d) - 1]);
            }
            _ => offending.push(ex.id.clone()),
        }
    }
    if !offending.is_empty() {
        return Err(Error::MissingAnnotation { ids: offending });
    }
    DifficultyAssignment::new(Granularity::Fine, ScoreSource::Direct, levels)
}

fn gold_class_confidence(
    trainer: &Trainer<'_>,
    dataset: &Dataset,
    gold_labels: &[u8],
    source: ScoreSource,
) -> Result<ConfidenceScore> {
    let mut scores = BTreeMap::new();
    for (ex, &y) in dataset.examples().iter().zip(gold_labels) {
        let p = trainer.model().forward(&ex.features)?;
        scores.insert(ex.id.clone(), p[usize::from(y)]);
    }
    Ok(ConfidenceScore { source, scores })
}

fn gold_data(dataset: &Dataset) -> Result<(TrainingData, Vec<u8>)> {
    let gold = dataset.gold_labels(TiePolicy::Error)?;
    let labels: Vec<u8> = gold.iter().map(|g| g.label).collect();
    Ok((TrainingData::with_labels(dataset, labels.clone())?, labels))
}

/// Trains a fresh model on `train` and scores each training example by the
/// model's probability of its gold label.
pub fn score_self_taught(train: &Dataset, learner_config: &LearnerConfig, seed: u64) -> Result<ConfidenceScore> {
    if train.is_empty() {
        return Err(Error::Schema(
            "self-taught scoring needs a non-empty training set".into(),
        ));
    }
    let config = LearnerConfig {
        seed,
        ..learner_config.clone()
    };
    let (data, labels) = gold_data(train)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut trainer = Trainer::new(&config, train.feature_dim())?;
    trainer.fit_stage(&data, &rows, config.epochs, &mut NoEval)?;
    gold_class_confidence(&trainer, train, &labels, ScoreSource::SelfTaught)
}

/// Trains on `pretrain`, fine-tunes on `train`, then scores `train` as
/// [`score_self_taught`] does.
pub fn score_transfer(
    train: &Dataset,
    pretrain: &Dataset,
    learner_config: &LearnerConfig,
    seed: u64,
) -> Result<ConfidenceScore> {
    if pretrain.feature_dim() != train.feature_dim() {
        return Err(Error::Schema(format!(
            "pretraining data has {} features, training data {}",
            pretrain.feature_dim(),
            train.feature_dim()
        )));
    }
    if train.is_empty() || pretrain.is_empty() {
        return Err(Error::Schema("transfer scoring needs non-empty datasets".into()));
    }
    let config = LearnerConfig {
        seed,
        ..learner_config.clone()
    };
    let (pre_data, _) = gold_data(pretrain)?;
    let (data, labels) = gold_data(train)?;
    let mut trainer = Trainer::new(&config, train.feature_dim())?;
    let pre_rows: Vec<usize> = (0..pre_data.len()).collect();
    trainer.fit_stage(&pre_data, &pre_rows, config.epochs, &mut NoEval)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    trainer.fit_stage(&data, &rows, config.epochs, &mut NoEval)?;
    gold_class_confidence(&trainer, train, &labels, ScoreSource::Transfer)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSelection {
    pub tau: f64,
    pub assignment: DifficultyAssignment,
}

/// Picks τ so that roughly `target_easy_fraction` of the scores exceed it.
///
/// With scores sorted ascending, τ is the value at index
/// `floor((1 − f)·N) − 1`, clamped to `[0, N − 1]`; an example is easy iff its
/// score is strictly greater than τ.
pub fn threshold_tau(scores: &ConfidenceScore, target_easy_fraction: f64) -> Result<TauSelection> {
    if !(target_easy_fraction > 0.0 && target_easy_fraction < 1.0) {
        return Err(Error::Range(format!(
            "target easy fraction must lie in (0, 1), got {target_easy_fraction}"
        )));
    }
    if scores.scores.is_empty() {
        return Err(Error::Schema("cannot threshold an empty score set".into()));
    }
    if let Some((id, _)) = scores.scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite confidence for `{id}`")));
    }
    let mut sorted: Vec<f64> = scores.scores.values().copied().collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let below = ((1.0 - target_easy_fraction) * n as f64).floor() as usize;
    let index = below.saturating_sub(1).min(n - 1);
    let tau = sorted[index];
    if sorted[0] == sorted[n - 1] {
        log::warn!("all {n} confidence scores are equal; every example is hard");
    }
    let levels = scores
        .scores
        .iter()
        .map(|(id, &s)| (id.clone(), if s > tau { Level::Easy } else { Level::Hard }))
        .collect();
    Ok(TauSelection {
        tau,
        assignment: DifficultyAssignment::new(Granularity::Coarse, scores.source, levels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AnnotatedExample;

    fn ds_with(k: usize, rows: &[(usize, Option<u8>)]) -> Dataset {
        let examples = rows
            .iter()
            .enumerate()
            .map(|(i, &(agree, direct))| {
                let mut labels = vec![1u8; agree];
                labels.resize(k, 0);
                AnnotatedExample {
                    id: format!("e{i}"),
                    group_id: "g".into(),
                    features: vec![i as f64],
                    annotator_labels: labels,
                    direct_difficulty: direct,
                    latent_difficulty: None,
                    latent_truth: None,
                }
            })
            .collect();
        Dataset::new(examples, k, 1, ["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn agreement_levels() {
        let ds = ds_with(7, &[(7, None), (6, None), (5, None), (4, None), (0, None), (3, None)]);
        let fine = bin_by_agreement(&ds, Granularity::Fine).unwrap();
        let got: Vec<Level> = (0..6).map(|i| fine.get(&format!("e{i}")).unwrap().level).collect();
        use Level::*;
        assert_eq!(got, vec![VeryEasy, Easy, Hard, VeryHard, VeryEasy, VeryHard]);
        let coarse = bin_by_agreement(&ds, Granularity::Coarse).unwrap();
        assert_eq!(coarse.get("e0").unwrap().level, Easy);
        assert_eq!(coarse.get("e3").unwrap().level, Hard);
        assert_eq!(coarse.get("e1").unwrap().level, Easy);
        assert_eq!(coarse.get("e2").unwrap().level, Hard);
        assert_eq!(coarse.source, ScoreSource::Agreement);
    }

    #[test]
    fn fine_rejected_for_other_k() {
        let ds = ds_with(3, &[(3, None), (2, None)]);
        assert!(matches!(
            bin_by_agreement(&ds, Granularity::Fine),
            Err(Error::Granularity(_))
        ));
        let coarse = bin_by_agreement(&ds, Granularity::Coarse).unwrap();
        assert_eq!(coarse.get("e0").unwrap().level, Level::Easy);
        assert_eq!(coarse.get("e1").unwrap().level, Level::Hard);
    }

    #[test]
    fn direct_levels_and_missing_ids() {
        let ds = ds_with(7, &[(7, Some(1)), (7, Some(2)), (7, Some(3)), (7, Some(4))]);
        let a = bin_by_direct_annotation(&ds).unwrap();
        let got: Vec<Level> = (0..4).map(|i| a.get(&format!("e{i}")).unwrap().level).collect();
        assert_eq!(got, Level::FINE.to_vec());

        let ds = ds_with(7, &[(7, Some(1)), (7, None), (7, Some(3)), (7, None)]);
        match bin_by_direct_annotation(&ds) {
            Err(Error::MissingAnnotation { ids }) => assert_eq!(ids, vec!["e1", "e3"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coarse_assignment_rejects_fine_levels() {
        let levels = BTreeMap::from([("a".to_string(), Level::VeryEasy)]);
        assert!(DifficultyAssignment::new(Granularity::Coarse, ScoreSource::Random, levels).is_err());
    }

    #[test]
    fn tau_uniform_quantile() {
        let scores = ConfidenceScore {
            source: ScoreSource::SelfTaught,
            scores: (1..=100).map(|i| (format!("s{i:03}"), i as f64 / 100.0)).collect(),
        };
        let sel = threshold_tau(&scores, 0.5).unwrap();
        assert_eq!(sel.tau, 0.5);
        assert_eq!(sel.assignment.ids_at(Level::Easy).len(), 50);
    }

    #[test]
    fn tau_degenerate_scores_all_hard() {
        let scores = ConfidenceScore {
            source: ScoreSource::Transfer,
            scores: (0..10).map(|i| (format!("s{i}"), 0.7)).collect(),
        };
        let sel = threshold_tau(&scores, 0.4).unwrap();
        assert_eq!(sel.assignment.ids_at(Level::Hard).len(), 10);
        assert!(threshold_tau(&scores, 1.0).is_err());
    }

    #[test]
    fn assignment_jsonl_round_trip() {
        let ds = ds_with(7, &[(7, None), (6, None), (5, None), (4, None)]);
        let a = bin_by_agreement(&ds, Granularity::Fine).unwrap();
        let mut buf = Vec::new();
        a.write_jsonl(&mut buf).unwrap();
        let first = String::from_utf8(buf.clone()).unwrap();
        assert!(first.starts_with(r#"{"id":"e0","level":"very_easy","source":"agreement"}"#));
        let back = DifficultyAssignment::read_jsonl(&buf[..], Granularity::Fine).unwrap();
        assert_eq!(back, a);
        assert!(DifficultyAssignment::read_jsonl(&buf[..], Granularity::Coarse).is_err());
    }
}
