use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u32,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(model: &mut Model, gradients: &[f64], state: &mut AdamState, lr: f64, hp: AdamParams) -> Result<()> {
    let n = model.num_params();
    if gradients.len() != n || state.m.len() != n {
        return Err(Error::Schema(format!(
            "gradient has {} entries, model has {n} parameters",
            gradients.len()
        )));
    }
    if let Some(i) = gradients.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient in {}",
            model.describe_param(i)
        )));
    }
    let params = model.params_mut();
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(gradients).zip(&mut state.m).zip(&mut state.v) {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(())
}
