//! Adam optimizer with bias correction.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;

/// Adam hyperparameters. `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8` unless
/// overridden; the learning rate is always explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> AdamConfig {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter optimizer state (first and second moment estimates plus the
/// shared step counter).
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize, cfg: AdamConfig) -> AdamState {
        AdamState { cfg, step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update of `param` in place using `grad`.
    ///
    /// update: m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;
    /// p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
    ///
    /// A NaN or infinite gradient component aborts with an error naming the
    /// parameter so the training loop can surface which tensor diverged.
    pub fn apply(&mut self, name: &str, param: &Tensor, grad: &[f64]) -> Result<()> {
        if grad.len() != param.numel() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                detail: alloc::format!(
                    "gradient length {} does not match parameter '{name}' with {} elements",
                    grad.len(),
                    param.numel()
                ),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { param: name.to_string() });
        }
        self.step += 1;
        let t = u32::try_from(self.step).unwrap_or(u32::MAX);
        let bc1 = 1.0 - math::powi(self.cfg.beta1, t);
        let bc2 = 1.0 - math::powi(self.cfg.beta2, t);
        let mut data = param.data_mut();
        for i in 0..grad.len() {
            let g = grad[i];
            self.m[i] = self.cfg.beta1 * self.m[i] + (1.0 - self.cfg.beta1) * g;
            self.v[i] = self.cfg.beta2 * self.v[i] + (1.0 - self.cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            data[i] -= self.cfg.lr * m_hat / (math::sqrt(v_hat) + self.cfg.eps);
        }
        Ok(())
    }

    /// Convenience wrapper that pulls the accumulated gradient off the
    /// tensor. Fails if backward never populated one.
    pub fn step_param(&mut self, name: &str, param: &Tensor) -> Result<()> {
        let grad = param
            .grad()
            .ok_or_else(|| Error::MissingGradient { param: String::from(name) })?;
        self.apply(name, param, &grad)
    }
}
