//! Declarative experiment configuration, read from TOML.
//!
//! ```toml
//! name = "full_comparison"
//! master_seed = 1
//! num_seeds = 20
//!
//! [dataset]
//! kind = "synthetic"          # or kind = "file", path = "data.jsonl"
//! [dataset.generator]
//! num_examples = 5000
//!
//! [learner]
//! hidden_sizes = [16]
//!
//! [[arms]]
//! name = "vanilla"
//! kind = "single_stage"
//! bins = ["very_easy", "easy", "hard", "very_hard"]
//!
//! [[arms]]
//! name = "curriculum"
//! kind = "curriculum"
//! ```
//!
//! Any key can be overridden from the command line with a dotted path, e.g.
//! `learner.epochs=10` or `dataset.generator.seed=3`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetFormat;
use crate::difficulty::Level;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::seed::derive_seed;
use crate::synth::GenConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        #[serde(default)]
        generator: GenConfig,
    },
    File {
        path: PathBuf,
        /// Inferred from the extension when absent.
        format: Option<DatasetFormat>,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic {
            generator: GenConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Draw a new group split for every seed; otherwise one split for all seeds.
    pub resplit_per_seed: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            resplit_per_seed: true,
        }
    }
}

/// Difficulty proxies for two-stage schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proxy {
    /// Coarse annotator agreement.
    Agreement,
    SelfTaught,
    Transfer,
}

impl Proxy {
    pub fn name(self) -> &'static str {
        match self {
            Proxy::Agreement => "agreement",
            Proxy::SelfTaught => "self_taught",
            Proxy::Transfer => "transfer",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Proxy::Agreement => "Annotator Agreement",
            Proxy::SelfTaught => "Self-Taught Scoring",
            Proxy::Transfer => "Transfer Learning",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmSpec {
    /// Easy-first cumulative stages over agreement bins.
    Curriculum,
    /// Hard-first cumulative stages over agreement bins.
    Anti,
    /// Easy-first cumulative stages over direct difficulty scores.
    Direct,
    /// Random nested stages with the agreement curriculum's stage sizes.
    RandomControl,
    SingleStage {
        bins: Vec<Level>,
    },
    TwoStage {
        proxy: Proxy,
        hard_ratio: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub name: String,
    /// Epochs of each of this arm's stages; overrides the experiment-wide value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_per_stage: Option<usize>,
    #[serde(flatten)]
    pub spec: ArmSpec,
}

/// A trained model (arm, stage) whose test predictions enter the κ sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaModel {
    pub arm: String,
    /// 1-based; the arm's last stage when absent.
    pub stage: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub top_k: usize,
    pub baseline_arm: String,
    pub kappa_thresholds: Vec<f64>,
    pub kappa_models: Vec<KappaModel>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            top_k: 5,
            baseline_arm: "vanilla".into(),
            kappa_thresholds: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            kappa_models: vec![
                KappaModel {
                    arm: "vanilla".into(),
                    stage: None,
                },
                KappaModel {
                    arm: "curriculum".into(),
                    stage: Some(3),
                },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub ratios: Vec<f64>,
    pub proxies: Vec<Proxy>,
    /// Pretraining data for the transfer proxy. When absent and the dataset is
    /// synthetic, a related generator is derived: same class-mean direction, a fresh
    /// sample seed, and class means shifted by `pretrain_mean_shift`.
    pub pretrain: Option<DatasetSource>,
    pub pretrain_mean_shift: f64,
    /// Epochs of the easy-only stage and of the mixed stage. Defaults to the
    /// experiment-wide stage length for both; the single-stage baseline always
    /// keeps that length.
    pub stage_epochs: Option<[usize; 2]>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ratios: vec![0.25, 0.33, 0.5, 0.75, 1.0],
            proxies: vec![Proxy::Agreement, Proxy::SelfTaught, Proxy::Transfer],
            pretrain: None,
            pretrain_mean_shift: 0.5,
            stage_epochs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub master_seed: u64,
    /// Explicit seed labels; when empty, `num_seeds` labels 0, 1, … are used.
    pub seeds: Vec<u64>,
    pub num_seeds: usize,
    pub dataset: DatasetSource,
    pub split: SplitConfig,
    pub learner: LearnerConfig,
    /// Epochs of every stage; defaults to `learner.epochs`.
    pub epochs_per_stage: Option<usize>,
    pub arms: Vec<ArmConfig>,
    pub evaluation: EvaluationConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            master_seed: 0,
            seeds: Vec::new(),
            num_seeds: 20,
            dataset: DatasetSource::default(),
            split: SplitConfig::default(),
            learner: LearnerConfig::default(),
            epochs_per_stage: None,
            arms: full_comparison_arms(),
            evaluation: EvaluationConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// The five blocks of the main comparison: single-stage subsets, curriculum,
/// anti-curriculum, direct-score curriculum and the random control.
pub fn full_comparison_arms() -> Vec<ArmConfig> {
    use Level::*;
    let single = |name: &str, bins: Vec<Level>| ArmConfig {
        name: name.into(),
        epochs_per_stage: None,
        spec: ArmSpec::SingleStage { bins },
    };
    let arm = |name: &str, spec: ArmSpec| ArmConfig {
        name: name.into(),
        epochs_per_stage: None,
        spec,
    };
    vec![
        single("vanilla", vec![VeryEasy, Easy, Hard, VeryHard]),
        single("very_easy_only", vec![VeryEasy]),
        single("easy_only", vec![Easy]),
        single("very_easy_easy", vec![VeryEasy, Easy]),
        single("very_easy_easy_hard", vec![VeryEasy, Easy, Hard]),
        arm("curriculum", ArmSpec::Curriculum),
        arm("anti", ArmSpec::Anti),
        arm("direct", ArmSpec::Direct),
        arm("random_control", ArmSpec::RandomControl),
    ]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Applies `key.path=value` overrides; values are parsed as TOML, falling back to strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut tree = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{raw}` is not key=value")))?;
            set_path(&mut tree, key.trim(), parse_toml_value(value.trim()))?;
        }
        tree.try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn stage_epochs(&self) -> usize {
        self.epochs_per_stage.unwrap_or(self.learner.epochs)
    }

    /// Epochs of every stage of `arm`.
    /// Epochs of the two stages of every ratio-sweep cell.
    pub fn sweep_stage_epochs(&self) -> [usize; 2] {
        self.sweep.stage_epochs.unwrap_or([self.stage_epochs(); 2])
    }

    pub fn arm_stage_epochs(&self, arm: &ArmConfig) -> usize {
        arm.epochs_per_stage.unwrap_or_else(|| self.stage_epochs())
    }

    /// Seed labels in run order.
    pub fn seed_labels(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.num_seeds as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    /// Root seed of one replicate; every random choice of that replicate derives from it.
    pub fn replicate_seed(&self, label: u64) -> u64 {
        derive_seed(self.master_seed, &["replicate", &label.to_string()])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.learner.validate()?;
        let seeds = self.seed_labels();
        if seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad("split.test_fraction must lie in (0, 1)".into());
        }
        let shortest = self
            .arms
            .iter()
            .map(|a| self.arm_stage_epochs(a))
            .chain([self.stage_epochs()])
            .chain(self.sweep_stage_epochs())
            .min()
            .unwrap_or(0);
        if self.evaluation.top_k == 0 || shortest < self.evaluation.top_k {
            return bad(format!(
                "every stage needs at least top_k = {} epochs, got {shortest}",
                self.evaluation.top_k
            ));
        }
        let mut names: Vec<&str> = self.arms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        let before = names.len();
        names.dedup();
        if names.len() != before {
            return bad("arm names must be unique".into());
        }
        for arm in &self.arms {
            match &arm.spec {
                ArmSpec::SingleStage { bins } if bins.is_empty() => {
                    return bad(format!("arm `{}` names no bins", arm.name));
                }
                ArmSpec::TwoStage { hard_ratio, .. } if !(*hard_ratio > 0.0 && *hard_ratio <= 1.0) => {
                    return bad(format!("arm `{}` hard_ratio must lie in (0, 1]", arm.name));
                }
                _ => {}
            }
        }
        if let Some(t) = self
            .evaluation
            .kappa_thresholds
            .iter()
            .find(|t| !(**t > 0.0 && **t < 1.0))
        {
            return bad(format!("κ threshold {t} outside (0, 1)"));
        }
        if let Some(r) = self.sweep.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return bad(format!("sweep ratio {r} outside (0, 1]"));
        }
        if let DatasetSource::Synthetic { generator } = &self.dataset {
            generator.validate()?;
        }
        Ok(())
    }
}

fn parse_toml_value(raw: &str) -> toml::Value {
    // Parse as the right-hand side of a one-key document.
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(tree: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::Config("empty override key".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn minimal_file_parses() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            name = "tiny"
            seeds = [3, 4]
            [dataset]
            kind = "file"
            path = "data.csv"
            [[arms]]
            name = "vanilla"
            kind = "single_stage"
            bins = ["very_easy", "easy", "hard", "very_hard"]
            [[arms]]
            name = "mix"
            kind = "two_stage"
            proxy = "self_taught"
            hard_ratio = 0.33
            "#,
        )
        .unwrap();
        assert_eq!(c.seed_labels(), vec![3, 4]);
        assert_eq!(c.arms.len(), 2);
        assert_eq!(
            c.arms[1].spec,
            ArmSpec::TwoStage {
                proxy: Proxy::SelfTaught,
                hard_ratio: 0.33
            }
        );
        assert!(ExperimentConfig::from_toml_str("bogus_key = 1").is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ExperimentConfig::default()
            .with_overrides(&[
                "learner.epochs=7",
                "dataset.generator.feature_dim=3",
                "name=run2",
                "seeds=[1,2]",
            ])
            .unwrap();
        assert_eq!(c.learner.epochs, 7);
        assert_eq!(c.name, "run2");
        assert_eq!(c.seeds, vec![1, 2]);
        match c.dataset {
            DatasetSource::Synthetic { generator } => assert_eq!(generator.feature_dim, 3),
            _ => panic!("dataset kind changed"),
        }
        assert!(ExperimentConfig::default()
            .with_overrides(&["learner.epochs=\"x\""])
            .is_err());
        assert!(ExperimentConfig::default().with_overrides(&["nonsense"]).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = ExperimentConfig {
            seeds: vec![1, 1],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.seeds.clear();
        c.epochs_per_stage = Some(3);
        assert!(c.validate().is_err());
    }
}
