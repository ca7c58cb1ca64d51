//! A small from-scratch binary classifier: dense ReLU layers with a two-way softmax
//! head, cross-entropy loss, Adam and exponential learning-rate decay.

mod adam;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamParams, AdamState};
pub use model::{init_model, predict_scores, Model};
pub use train::{
    train_schedule, EpochRecord, Evaluator, NoEval, StageSummary, TestSetEvaluator, Trainer, TrainingData, TrainingLog,
    TRAINING_LOG_CSV_HEADER,
};

/// How the decay exponent advances across stages of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrCounter {
    /// The exponent keeps counting across stages.
    #[default]
    Global,
    /// Every stage restarts the exponent at zero.
    PerStage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Widths of the hidden layers; empty means logistic regression.
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Gaussian jitter applied per sample and epoch, in units of each feature's
    /// standard deviation over the data being fitted.
    pub augment_sigma: f64,
    pub weight_init_scale: f64,
    pub seed: u64,
    pub lr_counter: LrCounter,
    /// Re-initialize weights at the start of every stage instead of carrying them over.
    pub reinit_per_stage: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![8],
            epochs: 50,
            initial_lr: 1e-3,
            lr_decay: 0.91,
            batch_size: 8,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            augment_sigma: 0.1,
            weight_init_scale: 1.0,
            seed: 0,
            lr_counter: LrCounter::default(),
            reinit_per_stage: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("initial_lr must be positive, got {}", self.initial_lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive".into());
        }
        if !(self.augment_sigma >= 0.0 && self.augment_sigma.is_finite()) {
            return bad("augment_sigma must be finite and non-negative".into());
        }
        if !(self.weight_init_scale >= 0.0 && self.weight_init_scale.is_finite()) {
            return bad("weight_init_scale must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// `initial_lr · lr_decay^epoch`.
pub fn lr_at_epoch(config: &LearnerConfig, epoch: usize) -> f64 {
    config.initial_lr * config.lr_decay.powf(epoch as f64)
}
