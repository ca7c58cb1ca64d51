use std::io::Write;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::Scratch;
use super::{adam_step, init_model, lr_at_epoch, AdamState, LearnerConfig, LrCounter, Model};
use crate::dataset::{Dataset, GoldLabel, Label};
use crate::difficulty::Level;
use crate::error::{Error, Result};
use crate::metrics::{stratified_auc, AucResult};
use crate::schedule::CurriculumSchedule;
use crate::seed::{self, Rng};

/// Row-major feature matrix with one gold label per row.
#[derive(Clone, Debug)]
pub struct TrainingData {
    dim: usize,
    x: Vec<f64>,
    y: Vec<Label>,
    feature_std: Vec<f64>,
}

impl TrainingData {
    /// `gold` is aligned with `dataset.examples()`.
    pub fn new(dataset: &Dataset, gold: &[GoldLabel]) -> Result<Self> {
        let labels: Vec<Label> = gold.iter().map(|g| g.label).collect();
        Self::with_labels(dataset, labels)
    }

    pub fn with_labels(dataset: &Dataset, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != dataset.len() {
            return Err(Error::Schema(format!(
                "{} labels for {} examples",
                labels.len(),
                dataset.len()
            )));
        }
        let dim = dataset.feature_dim();
        let x: Vec<f64> = dataset
            .examples()
            .iter()
            .flat_map(|e| e.features.iter().copied())
            .collect();
        let n = dataset.len().max(1) as f64;
        let feature_std = (0..dim)
            .map(|j| {
                let col = || x.iter().skip(j).step_by(dim);
                let mean = col().sum::<f64>() / n;
                (col().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
            })
            .collect();
        Ok(Self {
            dim,
            x,
            y: labels,
            feature_std,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// Called after every epoch with the current model.
pub trait Evaluator {
    fn evaluate(&mut self, model: &Model) -> Result<Option<AucResult>>;
}

/// Skips evaluation.
pub struct NoEval;

impl Evaluator for NoEval {
    fn evaluate(&mut self, _model: &Model) -> Result<Option<AucResult>> {
        Ok(None)
    }
}

impl<F: FnMut(&Model) -> Result<Option<AucResult>>> Evaluator for F {
    fn evaluate(&mut self, model: &Model) -> Result<Option<AucResult>> {
        self(model)
    }
}

/// Stratified AUC on a fixed test set.
pub struct TestSetEvaluator {
    data: TrainingData,
    strata: Vec<Level>,
    scores: Vec<f64>,
    scratch: Scratch,
}

impl TestSetEvaluator {
    pub fn new(test: &Dataset, labels: Vec<Label>, strata: Vec<Level>) -> Result<Self> {
        if strata.len() != test.len() {
            return Err(Error::Schema(format!(
                "{} strata for {} test examples",
                strata.len(),
                test.len()
            )));
        }
        Ok(Self {
            data: TrainingData::with_labels(test, labels)?,
            strata,
            scores: Vec::new(),
            scratch: Scratch::default(),
        })
    }

    /// Class-1 probabilities of the test rows from the last evaluation.
    pub fn last_scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&mut self, model: &Model) -> &[f64] {
        self.scores.clear();
        for i in 0..self.data.len() {
            let p = model.prob_class1(self.data.row(i), &mut self.scratch);
            self.scores.push(p);
        }
        &self.scores
    }
}

impl Evaluator for TestSetEvaluator {
    fn evaluate(&mut self, model: &Model) -> Result<Option<AucResult>> {
        self.score(model);
        stratified_auc(&self.scores, &self.data.y, &self.strata).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based stage index.
    pub stage: usize,
    /// 0-based epoch within the stage.
    pub stage_epoch: usize,
    /// 0-based epoch over the whole run.
    pub epoch: usize,
    /// Exponent used in the decay law for this epoch.
    pub lr_epoch: usize,
    pub lr: f64,
    /// Mean training cross-entropy over the epoch.
    pub loss: f64,
    pub auc: Option<AucResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub epochs: usize,
    pub num_examples: usize,
    pub final_loss: f64,
    pub best_auc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    pub stages: Vec<StageSummary>,
}

pub const TRAINING_LOG_CSV_HEADER: &str =
    "stage,epoch,lr,loss,auc_overall,auc_very_easy,auc_easy,auc_hard,auc_very_hard";

impl TrainingLog {
    /// Overall test AUC of every epoch of a stage.
    pub fn stage_aucs(&self, stage: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.stage == stage)
            .filter_map(|r| r.auc.as_ref().map(|a| a.overall))
            .collect()
    }

    /// Per-epoch AUC on one test stratum; epochs where the stratum was omitted are skipped.
    pub fn stage_stratum_aucs(&self, stage: usize, level: Level) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.stage == stage)
            .filter_map(|r| r.auc.as_ref().and_then(|a| a.per_stratum.get(&level).copied()))
            .collect()
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{TRAINING_LOG_CSV_HEADER}")?;
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.records {
            let overall = r.auc.as_ref().map(|a| a.overall);
            let stratum = |l: Level| r.auc.as_ref().and_then(|a| a.per_stratum.get(&l).copied());
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.stage,
                r.epoch,
                r.lr,
                r.loss,
                cell(overall),
                cell(stratum(Level::VeryEasy)),
                cell(stratum(Level::Easy)),
                cell(stratum(Level::Hard)),
                cell(stratum(Level::VeryHard)),
            )?;
        }
        Ok(())
    }
}

/// Owns one training run: the model, its seeded generator and the log.
pub struct Trainer<'a> {
    config: &'a LearnerConfig,
    model: Model,
    rng: Rng,
    epochs_run: usize,
    lr_epochs: usize,
    log: TrainingLog,
    grad: Vec<f64>,
    scratch: Scratch,
    x_buf: Vec<f64>,
}

impl<'a> Trainer<'a> {
    /// Weights come from `config.seed`; shuffling and augmentation from a stream
    /// derived from the same seed.
    pub fn new(config: &'a LearnerConfig, feature_dim: usize) -> Result<Self> {
        Self::with_stream_seed(config, feature_dim, seed::derive_seed(config.seed, &["train"]))
    }

    /// Weights come from `config.seed`; shuffling and augmentation from `stream_seed`.
    pub fn with_stream_seed(config: &'a LearnerConfig, feature_dim: usize, stream_seed: u64) -> Result<Self> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(Error::Schema("feature dimension must be at least 1".into()));
        }
        let model = init_model(config, feature_dim);
        Ok(Self {
            config,
            grad: vec![0.0; model.num_params()],
            model,
            rng: seed::rng(stream_seed),
            epochs_run: 0,
            lr_epochs: 0,
            log: TrainingLog::default(),
            scratch: Scratch::default(),
            x_buf: vec![0.0; feature_dim],
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn into_parts(self) -> (Model, TrainingLog) {
        (self.model, self.log)
    }

    /// Runs one stage: `epochs` shuffled passes over the row multiset `rows`,
    /// evaluating after every epoch. The optimizer state is fresh for each stage.
    pub fn fit_stage(
        &mut self,
        data: &TrainingData,
        rows: &[usize],
        epochs: usize,
        evaluator: &mut dyn Evaluator,
    ) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::EmptyStage("no training rows".into()));
        }
        if data.dim() != self.model.feature_dim() {
            return Err(Error::Schema(format!(
                "model expects {} features, data has {}",
                self.model.feature_dim(),
                data.dim()
            )));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= data.len()) {
            return Err(Error::Schema(format!("row {bad} out of range")));
        }
        let stage = self.log.stages.len() + 1;
        if stage > 1 && self.config.reinit_per_stage {
            self.model = init_model(self.config, data.dim());
        }
        if self.config.lr_counter == LrCounter::PerStage {
            self.lr_epochs = 0;
        }
        let hp = self.config.adam();
        let mut state = AdamState::new(self.model.num_params());
        let mut order = rows.to_vec();
        let mut final_loss = f64::NAN;
        let mut best_auc: Option<f64> = None;
        let sigma = self.config.augment_sigma;

        for stage_epoch in 0..epochs {
            let lr = lr_at_epoch(self.config, self.lr_epochs);
            order.shuffle(&mut self.rng);
            let mut loss_sum = 0.0;
            for batch in order.chunks(self.config.batch_size) {
                self.grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in batch {
                    let row = data.row(i);
                    self.x_buf.copy_from_slice(row);
                    if sigma > 0.0 {
                        for (x, s) in self.x_buf.iter_mut().zip(&data.feature_std) {
                            let z: f64 = StandardNormal.sample(&mut self.rng);
                            *x += sigma * s * z;
                        }
                    }
                    loss_sum +=
                        self.model
                            .accumulate_gradient(&self.x_buf, data.y[i], &mut self.grad, &mut self.scratch);
                }
                let scale = 1.0 / batch.len() as f64;
                self.grad.iter_mut().for_each(|g| *g *= scale);
                adam_step(&mut self.model, &self.grad, &mut state, lr, hp).map_err(|e| match e {
                    Error::Numeric(msg) => Error::Numeric(format!("stage {stage}, epoch {stage_epoch}: {msg}")),
                    other => other,
                })?;
            }
            let loss = loss_sum / order.len() as f64;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss at stage {stage}, epoch {stage_epoch}"
                )));
            }
            if self.model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite parameters at stage {stage}, epoch {stage_epoch}"
                )));
            }
            let auc = evaluator.evaluate(&self.model)?;
            if let Some(a) = &auc {
                best_auc = Some(best_auc.map_or(a.overall, |b: f64| b.max(a.overall)));
            }
            self.log.records.push(EpochRecord {
                stage,
                stage_epoch,
                epoch: self.epochs_run,
                lr_epoch: self.lr_epochs,
                lr,
                loss,
                auc,
            });
            final_loss = loss;
            self.epochs_run += 1;
            self.lr_epochs += 1;
        }
        self.log.stages.push(StageSummary {
            stage,
            epochs,
            num_examples: rows.len(),
            final_loss,
            best_auc,
        });
        Ok(())
    }
}

/// Resolves a schedule's id multisets into row indices of `dataset`.
pub(crate) fn schedule_rows(dataset: &Dataset, schedule: &CurriculumSchedule) -> Result<Vec<Vec<usize>>> {
    let index = dataset.index_of();
    schedule
        .stages
        .iter()
        .map(|stage| {
            stage
                .example_ids
                .iter()
                .map(|id| {
                    index
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::Schema(format!("stage {} references unknown id `{id}`", stage.index)))
                })
                .collect()
        })
        .collect()
}

/// Trains a fresh model through every stage of `schedule`, carrying weights across
/// stages, and evaluating after every epoch.
pub fn train_schedule(
    train: &Dataset,
    gold: &[GoldLabel],
    schedule: &CurriculumSchedule,
    config: &LearnerConfig,
    evaluator: &mut dyn Evaluator,
) -> Result<(Model, TrainingLog)> {
    let data = TrainingData::new(train, gold)?;
    let rows = schedule_rows(train, schedule)?;
    let mut trainer = Trainer::new(config, train.feature_dim())?;
    for (stage, stage_rows) in schedule.stages.iter().zip(&rows) {
        trainer.fit_stage(&data, stage_rows, stage.epochs, evaluator)?;
    }
    Ok(trainer.into_parts())
}
