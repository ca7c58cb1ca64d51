use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LearnerConfig;
use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerSpan {
    n_in: usize,
    n_out: usize,
    weights: usize,
    biases: usize,
}

/// Dense network parameters.
///
/// Parameters live in one flat vector. Layer `l` stores its `n_out × n_in` weight
/// matrix row-major (one row per output unit) followed by its `n_out` biases. The
/// serialized checkpoint is `{"sizes": [F, h1, .., 2], "params": [...]}` in that layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDump", into = "ModelDump")]
pub struct Model {
    sizes: Vec<usize>,
    params: Vec<f64>,
    spans: Vec<LayerSpan>,
}

#[derive(Serialize, Deserialize)]
struct ModelDump {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl TryFrom<ModelDump> for Model {
    type Error = Error;

    fn try_from(dump: ModelDump) -> Result<Self> {
        if dump.sizes.len() < 2 || dump.sizes.last() != Some(&2) || dump.sizes.contains(&0) {
            return Err(Error::Schema(format!("invalid architecture {:?}", dump.sizes)));
        }
        let spans = layout(&dump.sizes);
        let expected = spans.last().map_or(0, |s| s.biases + s.n_out);
        if dump.params.len() != expected {
            return Err(Error::Schema(format!(
                "architecture {:?} needs {expected} parameters, checkpoint has {}",
                dump.sizes,
                dump.params.len()
            )));
        }
        if dump.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("checkpoint contains non-finite parameters".into()));
        }
        Ok(Model {
            sizes: dump.sizes,
            params: dump.params,
            spans,
        })
    }
}

impl From<Model> for ModelDump {
    fn from(m: Model) -> Self {
        ModelDump {
            sizes: m.sizes,
            params: m.params,
        }
    }
}

fn layout(sizes: &[usize]) -> Vec<LayerSpan> {
    let mut offset = 0;
    sizes
        .windows(2)
        .map(|w| {
            let span = LayerSpan {
                n_in: w[0],
                n_out: w[1],
                weights: offset,
                biases: offset + w[0] * w[1],
            };
            offset = span.biases + span.n_out;
            span
        })
        .collect()
}

/// Fresh parameters: weights ~ N(0, (scale · √(2 / fan_in))²), biases zero.
/// Deterministic in `config.seed`.
pub fn init_model(config: &LearnerConfig, feature_dim: usize) -> Model {
    let mut sizes = Vec::with_capacity(config.hidden_sizes.len() + 2);
    sizes.push(feature_dim);
    sizes.extend_from_slice(&config.hidden_sizes);
    sizes.push(2);
    let spans = layout(&sizes);
    let total = spans.last().map_or(0, |s| s.biases + s.n_out);
    let mut params = vec![0.0; total];
    let mut rng = seed::derived_rng(config.seed, &["init"]);
    for span in &spans {
        let std = config.weight_init_scale * (2.0 / span.n_in as f64).sqrt();
        for w in &mut params[span.weights..span.biases] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = std * z;
        }
    }
    Model { sizes, params, spans }
}

/// Reusable activation buffers for forward/backward passes.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Model {
    pub fn feature_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Layer widths including input and the two-unit output.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Human-readable name of the block containing flat parameter `index`.
    pub fn describe_param(&self, index: usize) -> String {
        for (l, span) in self.spans.iter().enumerate() {
            if index < span.biases {
                return format!("layer {l} weights");
            }
            if index < span.biases + span.n_out {
                return format!("layer {l} bias");
            }
        }
        format!("parameter {index} (out of range)")
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.feature_dim() {
            return Err(Error::Schema(format!(
                "model expects {} features, got {}",
                self.feature_dim(),
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite input feature".into()));
        }
        Ok(())
    }

    /// Class probabilities `[p0, p1]`.
    pub fn forward(&self, features: &[f64]) -> Result<[f64; 2]> {
        self.check_input(features)?;
        let mut scratch = Scratch::default();
        let logits = self.logits(features, &mut scratch);
        Ok(softmax2(logits))
    }

    /// Class-1 probability without input validation, for hot loops over validated data.
    pub(crate) fn prob_class1(&self, features: &[f64], scratch: &mut Scratch) -> f64 {
        softmax2(self.logits(features, scratch))[1]
    }

    fn logits(&self, features: &[f64], scratch: &mut Scratch) -> [f64; 2] {
        let n_layers = self.spans.len();
        scratch.acts.resize_with(n_layers + 1, Vec::new);
        scratch.acts[0].clear();
        scratch.acts[0].extend_from_slice(features);
        for (l, span) in self.spans.iter().enumerate() {
            let (before, after) = scratch.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            out.clear();
            let w = &self.params[span.weights..span.biases];
            let b = &self.params[span.biases..span.biases + span.n_out];
            let hidden = l + 1 < n_layers;
            for o in 0..span.n_out {
                let row = &w[o * span.n_in..(o + 1) * span.n_in];
                let mut z = b[o];
                for (wi, xi) in row.iter().zip(input) {
                    z += wi * xi;
                }
                out.push(if hidden { z.max(0.0) } else { z });
            }
        }
        let last = &scratch.acts[n_layers];
        [last[0], last[1]]
    }

    /// Cross-entropy loss of one example; adds its gradient into `grad`.
    pub(crate) fn accumulate_gradient(
        &self,
        features: &[f64],
        label: Label,
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> f64 {
        let logits = self.logits(features, scratch);
        let probs = softmax2(logits);
        let y = label as usize;
        let max = logits[0].max(logits[1]);
        let lse = max + ((logits[0] - max).exp() + (logits[1] - max).exp()).ln();
        let loss = lse - logits[y];

        scratch.delta.clear();
        scratch.delta.extend_from_slice(&probs);
        scratch.delta[y] -= 1.0;

        for (l, span) in self.spans.iter().enumerate().rev() {
            let input = &scratch.acts[l];
            let gw = span.weights;
            for o in 0..span.n_out {
                let d = scratch.delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[span.biases + o] += d;
                let row = &mut grad[gw + o * span.n_in..gw + (o + 1) * span.n_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l == 0 {
                break;
            }
            scratch.delta_prev.clear();
            scratch.delta_prev.resize(span.n_in, 0.0);
            let w = &self.params[span.weights..span.biases];
            for o in 0..span.n_out {
                let d = scratch.delta[o];
                if d == 0.0 {
                    continue;
                }
                for (dp, wi) in scratch
                    .delta_prev
                    .iter_mut()
                    .zip(&w[o * span.n_in..(o + 1) * span.n_in])
                {
                    *dp += d * wi;
                }
            }
            // ReLU derivative: post-activation > 0 iff pre-activation > 0
            for (dp, a) in scratch.delta_prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *dp = 0.0;
                }
            }
            std::mem::swap(&mut scratch.delta, &mut scratch.delta_prev);
        }
        loss
    }

    /// Mean cross-entropy over a batch and its gradient (same flat layout as the parameters).
    pub fn loss_and_gradient(&self, batch: &[(&[f64], Label)]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut scratch = Scratch::default();
        let mut loss = 0.0;
        for (x, y) in batch {
            self.check_input(x)?;
            loss += self.accumulate_gradient(x, *y, &mut grad, &mut scratch);
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    // p1 = σ(z1 − z0), computed from the sign that keeps exp() bounded.
    let d = logits[1] - logits[0];
    let p1 = if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    };
    [1.0 - p1, p1]
}

/// Class-1 probability of every example, keyed by id.
pub fn predict_scores(model: &Model, dataset: &Dataset) -> Result<BTreeMap<String, f64>> {
    if dataset.feature_dim() != model.feature_dim() {
        return Err(Error::Schema(format!(
            "model expects {} features, dataset has {}",
            model.feature_dim(),
            dataset.feature_dim()
        )));
    }
    let mut scratch = Scratch::default();
    Ok(dataset
        .examples()
        .iter()
        .map(|e| (e.id.clone(), model.prob_class1(&e.features, &mut scratch)))
        .collect())
}
