//! Curriculum learning by annotator agreement.
//!
//! Examples carry the labels of several annotators; the number of annotators who
//! agree with the majority defines how hard an example is. This crate builds
//! easy-to-hard training schedules from that signal (and from baseline proxies),
//! trains a small classifier through them, and evaluates the result with
//! difficulty-stratified ROC AUC, Cohen's κ and seed-level significance tests.

pub mod dataset;
pub mod difficulty;
pub mod error;
pub mod experiment;
pub mod learner;
pub mod metrics;
pub mod schedule;
pub mod seed;
pub mod synth;

pub use dataset::{AnnotatedExample, Dataset, DatasetFormat, GoldLabel, Label, TiePolicy};
pub use difficulty::{ConfidenceScore, DifficultyAssignment, DifficultyBin, Granularity, Level, ScoreSource};
pub use error::{Error, Result};
pub use learner::{LearnerConfig, Model, TrainingLog};
pub use schedule::{CurriculumSchedule, ScheduleKind, Stage};
pub use synth::GenConfig;
