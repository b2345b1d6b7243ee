//! RMSProp: a running mean of squared gradients scales each step.
//!
//! ```text
//! ms ← ρ·ms + (1 − ρ)·g²
//! p  ← p − lr·g / √(ms + ε)
//! ```

use ndarray::{ArrayD, Zip};
use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Elementwise update of one flat parameter buffer.
pub fn rmsprop_update(params: &mut [f64], grads: &[f64], mean_square: &mut [f64], config: &RmsPropConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != mean_square.len() {
        return Err(Error::shape(
            format!("{} gradients and accumulators", params.len()),
            format!("{} / {}", grads.len(), mean_square.len()),
        ));
    }
    let RmsPropConfig { learning_rate, rho, epsilon } = *config;
    for ((p, &g), ms) in params.iter_mut().zip(grads).zip(mean_square.iter_mut()) {
        *ms = rho * *ms + (1.0 - rho) * g * g;
        *p -= learning_rate * g / (*ms + epsilon).sqrt();
    }
    Ok(())
}

/// Optimizer state for a whole network.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    pub mean_square: Vec<ArrayD<f64>>,
}

impl RmsProp {
    pub fn new<P: Parameters>(config: RmsPropConfig, params: &P) -> Self {
        Self {
            config,
            mean_square: params.tensors().iter().map(|t| ArrayD::zeros(t.raw_dim())).collect(),
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if params.len() != grads.len() || params.len() != self.mean_square.len() {
            return Err(Error::shape(format!("{} tensors", self.mean_square.len()), params.len()));
        }
        let RmsPropConfig { learning_rate, rho, epsilon } = self.config;
        for ((p, g), ms) in params.iter_mut().zip(&grads).zip(&mut self.mean_square) {
            if p.shape() != g.shape() || p.shape() != ms.shape() {
                return Err(Error::shape(format!("{:?}", p.shape()), format!("{:?}", g.shape())));
            }
            Zip::from(p).and(g).and(ms).for_each(|p, &g, ms| {
                *ms = rho * *ms + (1.0 - rho) * g * g;
                *p -= learning_rate * g / (*ms + epsilon).sqrt();
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_decays_accumulator() {
        let mut p = [1.0, -2.0];
        let mut ms = [0.5, 0.25];
        rmsprop_update(&mut p, &[0.0, 0.0], &mut ms, &RmsPropConfig::default()).unwrap();
        assert_eq!(p, [1.0, -2.0]);
        assert!((ms[0] - 0.45).abs() < 1e-15);
        assert!((ms[1] - 0.225).abs() < 1e-15);
    }

    #[test]
    fn first_unit_step() {
        let mut p = [0.0];
        let mut ms = [0.0];
        rmsprop_update(&mut p, &[1.0], &mut ms, &RmsPropConfig::default()).unwrap();
        assert!((ms[0] - 0.1).abs() < 1e-15);
        // 0.001 / sqrt(0.1 + 1e-8)
        assert!((p[0] + 0.003_162_277_5).abs() < 1e-9, "{}", p[0]);
    }

    #[test]
    fn mismatched_lengths() {
        let mut p = [0.0, 1.0];
        let mut ms = [0.0];
        assert!(rmsprop_update(&mut p, &[1.0, 1.0], &mut ms, &RmsPropConfig::default()).is_err());
    }
}
