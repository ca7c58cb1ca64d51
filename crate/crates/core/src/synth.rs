//! Synthetic annotated datasets with a latent difficulty continuum.
//!
//! Each example draws a class `y`, a difficulty `d ~ Beta(α, β)` and features
//! `±s·(1 − d)·u + noise`, so hard examples collapse toward the decision boundary.
//! Each of the K annotators flips `y` independently with probability
//! `p(d) = p_min + (p_max − p_min)·d` (plus an optional per-annotator bias).

use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotatedExample, Dataset, Label, TiePolicy};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub num_examples: usize,
    pub num_groups: usize,
    pub feature_dim: usize,
    pub num_annotators: usize,
    /// Probability of class 0.
    pub class_prior: f64,
    pub difficulty_alpha: f64,
    pub difficulty_beta: f64,
    pub class_mean_separation: f64,
    pub feature_noise_std: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Added to every annotator's flip probability, one entry per annotator.
    pub per_annotator_bias: Option<Vec<f64>>,
    /// Std of the Gaussian noise on `d` behind the simulated direct 1–4 score;
    /// `None` leaves the score absent.
    pub direct_score_noise: Option<f64>,
    /// Seed of the class-mean direction `u`; defaults to `seed`. Sharing it between
    /// two configs makes their class means related.
    pub direction_seed: Option<u64>,
    /// Offset added to both class means along the all-ones direction.
    pub class_mean_shift: f64,
    pub seed: u64,
}

/// Flip-probability ceiling found by `calibrate(0.645, …)` for the other defaults.
pub const CALIBRATED_P_MAX: f64 = 0.41268798746315005;

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_examples: 5000,
            num_groups: 250,
            feature_dim: 512,
            num_annotators: 7,
            class_prior: 0.686,
            difficulty_alpha: 2.0,
            difficulty_beta: 3.0,
            class_mean_separation: 2.0,
            feature_noise_std: 1.0,
            p_min: 0.02,
            p_max: CALIBRATED_P_MAX,
            per_annotator_bias: None,
            direct_score_noise: Some(0.25),
            direction_seed: None,
            class_mean_shift: 0.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_examples == 0 || self.num_groups == 0 || self.feature_dim == 0 || self.num_annotators == 0 {
            return bad("example, group, feature and annotator counts must be positive".into());
        }
        if !(self.class_prior > 0.0 && self.class_prior < 1.0) {
            return bad(format!("class_prior must lie in (0, 1), got {}", self.class_prior));
        }
        if !(self.difficulty_alpha > 0.0 && self.difficulty_beta > 0.0) {
            return bad("Beta shape parameters must be positive".into());
        }
        if !(self.p_min >= 0.0 && self.p_min <= self.p_max && self.p_max < 0.5) {
            return bad(format!(
                "need 0 ≤ p_min ≤ p_max < 0.5, got p_min = {}, p_max = {}",
                self.p_min, self.p_max
            ));
        }
        if let Some(bias) = &self.per_annotator_bias {
            if bias.len() != self.num_annotators {
                return bad(format!(
                    "per_annotator_bias has {} entries for {} annotators",
                    bias.len(),
                    self.num_annotators
                ));
            }
            for b in bias {
                if self.p_min + b < 0.0 || self.p_max + b >= 0.5 {
                    return bad(format!("annotator bias {b} pushes a flip probability outside [0, 0.5)"));
                }
            }
        }
        if !(self.feature_noise_std >= 0.0 && self.class_mean_separation.is_finite()) {
            return bad("feature noise must be non-negative and separation finite".into());
        }
        if let Some(n) = self.direct_score_noise {
            if !(n >= 0.0 && n.is_finite()) {
                return bad("direct_score_noise must be finite and non-negative".into());
            }
        }
        Ok(())
    }

    fn flip_probability(&self, d: f64, annotator: usize) -> f64 {
        let bias = self.per_annotator_bias.as_ref().map_or(0.0, |b| b[annotator]);
        self.p_min + (self.p_max - self.p_min) * d + bias
    }
}

fn unit_direction(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws one synthetic dataset; deterministic in `config.seed`.
pub fn generate(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let f = config.feature_dim;
    let k = config.num_annotators;
    let direction_seed = config.direction_seed.unwrap_or(config.seed);
    let u = unit_direction(f, &mut seed::derived_rng(direction_seed, &["direction"]));
    let shift = config.class_mean_shift / (f as f64).sqrt();
    let beta = Beta::new(config.difficulty_alpha, config.difficulty_beta)
        .map_err(|e| Error::Config(format!("difficulty distribution: {e}")))?;

    let mut rng = seed::derived_rng(config.seed, &["examples"]);
    let mut examples = Vec::with_capacity(config.num_examples);
    let width = config.num_examples.to_string().len().max(4);
    let group_width = config.num_groups.to_string().len().max(3);
    for i in 0..config.num_examples {
        let group = rng.random_range(0..config.num_groups);
        let y: Label = if rng.random::<f64>() < config.class_prior { 0 } else { 1 };
        let d: f64 = beta.sample(&mut rng);
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let scale = sign * config.class_mean_separation * (1.0 - d);
        let features = u
            .iter()
            .map(|&ui| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * ui + shift + config.feature_noise_std * z
            })
            .collect();
        let annotator_labels = (0..k)
            .map(|a| {
                let flip = rng.random::<f64>() < config.flip_probability(d, a);
                if flip {
                    1 - y
                } else {
                    y
                }
            })
            .collect();
        let direct_difficulty = config.direct_score_noise.map(|noise| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let noisy = (d + noise * z).clamp(0.0, 1.0);
            ((noisy * 4.0).floor() as u8 + 1).min(4)
        });
        examples.push(AnnotatedExample {
            id: format!("syn{i:0width$}"),
            group_id: format!("slide{group:0group_width$}"),
            features,
            annotator_labels,
            direct_difficulty,
            latent_difficulty: Some(d),
            latent_truth: Some(y),
        });
    }
    let dataset = Dataset::new(examples, k, f, ["HP".into(), "SSA".into()])?;
    if k % 2 == 1 {
        if let Some(rate) = gold_truth_agreement(&dataset)? {
            log::info!(
                "synthetic dataset (seed {}): majority vote matches latent truth on {:.2}% of examples",
                config.seed,
                100.0 * rate
            );
        }
    }
    Ok(dataset)
}

/// Fraction of examples whose majority-vote label equals the latent truth,
/// when latent truth is recorded for every example.
pub fn gold_truth_agreement(dataset: &Dataset) -> Result<Option<f64>> {
    let gold = dataset.gold_labels(TiePolicy::Error)?;
    let mut hits = 0usize;
    for (ex, g) in dataset.examples().iter().zip(&gold) {
        match ex.latent_truth {
            Some(t) => hits += usize::from(t == g.label),
            None => return Ok(None),
        }
    }
    Ok(Some(hits as f64 / dataset.len().max(1) as f64))
}

/// Fraction of examples in the coarse easy bin: agreement counts in the upper
/// half of the achievable majority counts ({6, 7} for K = 7).
pub fn coarse_easy_fraction(dataset: &Dataset) -> Result<f64> {
    let k = dataset.num_annotators();
    let gold = dataset.gold_labels(TiePolicy::Error)?;
    let easy = gold.iter().filter(|g| is_coarse_easy(g.agreement_count, k)).count();
    Ok(easy as f64 / dataset.len().max(1) as f64)
}

fn is_coarse_easy(count: usize, k: usize) -> bool {
    2 * count > k / 2 + 1 + k
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub config: GenConfig,
    pub achieved_easy_fraction: f64,
}

/// Number of simulated examples per calibration evaluation.
pub const CALIBRATION_SAMPLES: usize = 40_000;
/// Largest accepted gap between achieved and target easy fraction.
pub const CALIBRATION_TOLERANCE: f64 = 0.02;

/// Fixed draws for the annotator model, reused for every candidate `p_max` so the
/// simulated easy fraction varies smoothly with it.
struct AnnotatorSimulation {
    difficulties: Vec<f64>,
    uniforms: Vec<f64>,
    k: usize,
}

impl AnnotatorSimulation {
    fn new(config: &GenConfig, samples: usize) -> Result<Self> {
        let beta = Beta::new(config.difficulty_alpha, config.difficulty_beta)
            .map_err(|e| Error::Config(format!("difficulty distribution: {e}")))?;
        let mut rng = seed::derived_rng(config.seed, &["calibration"]);
        let k = config.num_annotators;
        let difficulties: Vec<f64> = (0..samples).map(|_| beta.sample(&mut rng)).collect();
        let uniforms = (0..samples * k).map(|_| rng.random::<f64>()).collect();
        Ok(Self {
            difficulties,
            uniforms,
            k,
        })
    }

    fn easy_fraction(&self, config: &GenConfig) -> f64 {
        let k = self.k;
        let easy = self
            .difficulties
            .iter()
            .enumerate()
            .filter(|&(i, &d)| {
                let flips = (0..k)
                    .filter(|&a| self.uniforms[i * k + a] < config.flip_probability(d, a))
                    .count();
                is_coarse_easy(flips.max(k - flips), k)
            })
            .count();
        easy as f64 / self.difficulties.len() as f64
    }
}

/// Searches `p_max` (everything else fixed) so the simulated coarse easy fraction
/// matches `target_easy_fraction` within [`CALIBRATION_TOLERANCE`].
pub fn calibrate(target_easy_fraction: f64, fixed: &GenConfig) -> Result<Calibration> {
    if !(target_easy_fraction > 0.0 && target_easy_fraction < 1.0) {
        return Err(Error::Range(format!(
            "calibration target must lie in (0, 1), got {target_easy_fraction}"
        )));
    }
    if fixed.num_annotators.is_multiple_of(2) {
        return Err(Error::Config("calibration needs an odd number of annotators".into()));
    }
    let mut probe = fixed.clone();
    probe.p_max = probe.p_min;
    probe.validate()?;
    let sim = AnnotatorSimulation::new(fixed, CALIBRATION_SAMPLES)?;
    let max_bias = fixed
        .per_annotator_bias
        .as_ref()
        .map_or(0.0, |b| b.iter().copied().fold(f64::MIN, f64::max));

    let fraction_at = |p_max: f64| {
        let c = GenConfig { p_max, ..fixed.clone() };
        sim.easy_fraction(&c)
    };
    let mut lo = fixed.p_min;
    let mut hi = (0.5 - max_bias - 1e-9).max(lo);
    let (f_lo, f_hi) = (fraction_at(lo), fraction_at(hi));
    // Easy fraction falls as p_max grows.
    if target_easy_fraction > f_lo + CALIBRATION_TOLERANCE {
        return Err(Error::CalibrationFailure {
            target: target_easy_fraction,
            closest: f_lo,
        });
    }
    if target_easy_fraction < f_hi - CALIBRATION_TOLERANCE {
        return Err(Error::CalibrationFailure {
            target: target_easy_fraction,
            closest: f_hi,
        });
    }
    let (mut best_p, mut best_f) = if (f_lo - target_easy_fraction).abs() <= (f_hi - target_easy_fraction).abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f = fraction_at(mid);
        if (f - target_easy_fraction).abs() < (best_f - target_easy_fraction).abs() {
            best_p = mid;
            best_f = f;
        }
        if f > target_easy_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-7 {
            break;
        }
    }
    if (best_f - target_easy_fraction).abs() > CALIBRATION_TOLERANCE {
        return Err(Error::CalibrationFailure {
            target: target_easy_fraction,
            closest: best_f,
        });
    }
    Ok(Calibration {
        config: GenConfig {
            p_max: best_p,
            ..fixed.clone()
        },
        achieved_easy_fraction: best_f,
    })
}
