//! First-moment/second-moment adaptive optimizer with bias correction.

use crate::network::{ModelGradients, ModelWeights, TrainStateBlob};
use crate::train::TrainError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Optimizer state: completed step count and the two running moments, flat
/// in the canonical parameter order of [`ModelWeights::visit_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize) -> AdamState {
        AdamState {
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// Checkpoint-format view of the state.
    pub fn to_blob(&self) -> TrainStateBlob {
        TrainStateBlob {
            iteration: self.step,
            adam_m: self.m.clone(),
            adam_v: self.v.clone(),
        }
    }

    pub fn from_blob(blob: &TrainStateBlob) -> AdamState {
        AdamState {
            step: blob.iteration,
            m: blob.adam_m.clone(),
            v: blob.adam_v.clone(),
        }
    }
}

/// One-element update; `t` is the 1-based step count after this update.
#[inline]
pub(crate) fn adam_update(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, t: u64, lr: f64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    let m_hat = *m / (1.0 - ADAM_BETA1.powi(t as i32));
    let v_hat = *v / (1.0 - ADAM_BETA2.powi(t as i32));
    *theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
}

/// Applies one optimizer step to every parameter in place.
pub fn adam_step(
    weights: &mut ModelWeights,
    grads: &ModelGradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    let mut flat = Vec::with_capacity(state.m.len());
    grads.visit_params(|v| flat.push(v));
    if flat.len() != state.m.len() || flat.len() != weights.param_count() {
        return Err(TrainError::InvalidConfig(format!(
            "optimizer state holds {} parameters, gradients {}, model {}",
            state.m.len(),
            flat.len(),
            weights.param_count()
        )));
    }
    state.step += 1;
    let t = state.step;
    let (ms, vs) = (&mut state.m, &mut state.v);
    let mut i = 0usize;
    weights.visit_params_mut(|theta| {
        adam_update(theta, flat[i], &mut ms[i], &mut vs[i], t, lr);
        i += 1;
    });
    Ok(())
}
