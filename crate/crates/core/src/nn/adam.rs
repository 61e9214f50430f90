use super::model::ModelParams;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Optimizer moments plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl AdamState {
    pub const DEFAULT_LR: f64 = 1e-3;

    pub fn new(params: &ModelParams<f32>, lr: f64) -> Self {
        let zeros: Vec<Vec<f32>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn matches(&self, params: &ModelParams<f32>) -> bool {
        let ok = |moments: &[Vec<f32>]| {
            moments.len() == params.tensors().len()
                && moments.iter().zip(params.tensors()).all(|(a, b)| a.len() == b.len())
        };
        ok(&self.m) && ok(&self.v)
    }
}

/// One Adam update with bias correction. Moments are kept in `f32`, the
/// per-step scalars in `f64`.
pub fn adam_step(params: &mut ModelParams<f32>, grads: &ModelParams<f32>, state: &mut AdamState) -> Result<()> {
    if !state.matches(params) || grads.tensors().len() != params.tensors().len() {
        return Err(Error::Shape("optimizer state does not match the parameters".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (lr, eps) = (state.lr, state.eps);
    for (((theta, g), m), v) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads.tensors())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        if g.len() != theta.len() {
            return Err(Error::Shape("gradient does not match the parameters".into()));
        }
        for i in 0..theta.len() {
            let gi = g[i] as f64;
            let mi = b1 * m[i] as f64 + (1.0 - b1) * gi;
            let vi = b2 * v[i] as f64 + (1.0 - b2) * gi * gi;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let step = lr * (mi / c1) / ((vi / c2).sqrt() + eps);
            theta[i] = (theta[i] as f64 - step) as f32;
        }
    }
    Ok(())
}
