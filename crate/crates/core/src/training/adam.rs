use alloc::string::String;
use alloc::vec::Vec;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::math;
use crate::numerics::{ParamStore, Tensor};

/// First and second moments per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, p)| Tensor::zeros(p.value.shape().to_vec())).collect();
        OptimizerState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// Rescales gradients so their global norm is at most `max_norm`.
pub fn clip_gradients(store: &mut ParamStore, max_norm: f64) {
    let norm = store.grad_norm();
    if norm > max_norm {
        store.scale_grads(max_norm / norm);
    }
}

/// One bias-corrected Adam update from the gradients held in `store`. A
/// non-finite gradient aborts before any parameter changes.
pub fn adam_step(store: &mut ParamStore, state: &mut OptimizerState, config: &TrainConfig) -> Result<()> {
    if let Some((_, p)) = store.iter().find(|(_, p)| !p.grad.is_finite()) {
        return Err(Error::NonFiniteGradient(String::from(p.name.as_str())));
    }
    if state.m.len() != store.len() {
        return Err(Error::LengthMismatch {
            left: state.m.len(),
            right: store.len(),
        });
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - math::exp(t * math::ln(config.beta1.max(f64::MIN_POSITIVE)));
    let c2 = 1.0 - math::exp(t * math::ln(config.beta2.max(f64::MIN_POSITIVE)));
    for (i, p) in store.iter_mut().enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let g = p.grad.data();
        let w = p.value.data_mut();
        for j in 0..w.len() {
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            w[j] -= config.learning_rate * m_hat / (math::sqrt(v_hat) + config.epsilon);
        }
    }
    Ok(())
}
