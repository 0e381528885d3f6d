use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::features::FeatureMode;
use super::model::{Gradient, LinearModel};
use crate::error::{Error, Result};

/// Optimizer and data settings for the trainable rankers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub grad_accumulation_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    pub betas: (f64, f64),
    pub epsilon: f64,
    pub max_features_tokens: usize,
    pub min_frequency: usize,
    pub feature_mode: FeatureMode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            weight_decay: 0.01,
            warmup_fraction: 0.03,
            grad_accumulation_steps: 4,
            epochs: 3,
            seed: 3407,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            max_features_tokens: 2048,
            min_frequency: 2,
            feature_mode: FeatureMode::Count,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_positive = |v: f64| v.is_finite() && v > 0.0;
        if !finite_positive(self.learning_rate) || !finite_positive(self.epsilon) {
            return Err(Error::Config("learning_rate and epsilon must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.betas.0) || !(0.0..1.0).contains(&self.betas.1) {
            return Err(Error::Config("betas must lie in [0, 1)"));
        }
        if self.grad_accumulation_steps == 0 || self.epochs == 0 || self.max_features_tokens == 0 {
            return Err(Error::Config("accumulation steps, epochs and token cap must be positive"));
        }
        if self.min_frequency == 0 {
            return Err(Error::Config("min_frequency must be positive"));
        }
        Ok(())
    }
}

/// `ceil(warmup_fraction * total_steps)`.
pub fn warmup_steps(total_steps: usize, config: &TrainingConfig) -> usize {
    // the guard keeps e.g. 0.03 * 100 from rounding up to 4
    libm::ceil(config.warmup_fraction * total_steps as f64 - 1e-9).max(0.0) as usize
}

/// Linear warmup from zero to the base rate, constant afterwards.
pub fn lr_schedule(global_step: usize, total_steps: usize, config: &TrainingConfig) -> f64 {
    let warmup = warmup_steps(total_steps.max(1), config);
    if global_step < warmup {
        config.learning_rate * global_step as f64 / warmup as f64
    } else {
        config.learning_rate
    }
}

/// AdamW with decoupled weight decay:
///
/// ```text
/// m = b1 m + (1 - b1) g
/// v = b2 v + (1 - b2) g^2
/// p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamW {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// Applies one update to `params` at rate `lr`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, config: &TrainingConfig) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape("optimizer state, params and gradient lengths differ"));
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index, step: self.step + 1 });
        }
        let (b1, b2) = config.betas;
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(b1, t);
        let c2 = 1.0 - libm::pow(b2, t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * (m_hat / (libm::sqrt(v_hat) + config.epsilon) + config.weight_decay * *p);
        }
        Ok(())
    }
}

/// One optimizer update of `model` with the scheduled rate for
/// `global_step` out of `total_steps`.
pub fn optimizer_step(
    model: &mut LinearModel,
    accumulated_grad: &Gradient,
    state: &mut AdamW,
    config: &TrainingConfig,
    global_step: usize,
    total_steps: usize,
) -> Result<f64> {
    let lr = lr_schedule(global_step, total_steps, config);
    state.step(model.params_mut(), &accumulated_grad.values, lr, config)?;
    Ok(lr)
}
