//! Adam with global gradient-norm clipping.

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    /// Number of updates applied so far.
    pub step: u64,
    pub first_moments: Vec<Tensor>,
    pub second_moments: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, learning_rate: f64, clip_norm: Option<f64>) -> Self {
        let zeros = || store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Self {
            learning_rate,
            clip_norm,
            step: 0,
            first_moments: zeros(),
            second_moments: zeros(),
        }
    }

    /// Clips the accumulated gradients of `store` to the global norm limit,
    /// applies one bias-corrected update and returns the pre-clip norm.
    pub fn update(&mut self, store: &mut ParamStore) -> Result<f64> {
        if self.first_moments.len() != store.len() {
            return Err(Error::shape("adam moments", &[self.first_moments.len()], &[store.len()]));
        }
        let norm = store.iter().map(|(_, p)| p.grad.sum_squares()).sum::<f64>().sqrt();
        let scale = match self.clip_norm {
            Some(limit) if norm > limit => limit / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - BETA1.powi(t);
        let correction2 = 1.0 - BETA2.powi(t);
        let lr = self.learning_rate;
        for ((param, m), v) in store
            .params_mut()
            .zip(self.first_moments.iter_mut())
            .zip(self.second_moments.iter_mut())
        {
            let grads = param.grad.data();
            let values = param.value.data_mut();
            for (((x, &g), m), v) in values
                .iter_mut()
                .zip(grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = g * scale;
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *x -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(norm)
    }
}

/// Scales every gradient in `store` so the global norm is at most `limit`.
pub fn clip_global_norm(store: &mut ParamStore, limit: f64) -> f64 {
    let norm = store.iter().map(|(_, p)| p.grad.sum_squares()).sum::<f64>().sqrt();
    if norm > limit {
        let s = limit / norm;
        store.params_mut().for_each(|p| p.grad.scale_in_place(s));
    }
    norm
}
