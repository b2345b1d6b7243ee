//! Dense, LSTM and GRU layers with hand-written backpropagation through
//! time, trained with RMSProp on a mean-squared-error objective.
//!
//! Batches are row-major: one sample per row. Sequences are stacked
//! step-major into a single `(steps * batch, width)` matrix, so rows
//! `t * batch .. (t + 1) * batch` hold timestep `t`.

pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod rmsprop;
pub mod train;

use ndarray::{ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};

pub use dense::{dense_forward, Dense};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use gru::{gru_step, Gru};
pub use loss::{mse_loss, mse_loss_batch};
pub use lstm::{lstm_step, Lstm};
pub use model::{predict, Mode, Model, ModelKind, ModelSpec, SequenceLayout};
pub use rmsprop::{rmsprop_update, RmsProp, RmsPropConfig};
pub use train::{train, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Uniform access to every trainable tensor of a layer or network, in a
/// fixed order shared by parameters, gradients and optimizer state.
pub trait Parameters {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>>;
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for act in [Activation::Linear, Activation::Relu, Activation::Sigmoid, Activation::Tanh] {
            for x in [-1.3, -0.2, 0.4, 2.1] {
                let h = 1e-6;
                let numeric = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                let analytic = act.derivative_from_output(act.apply(x));
                assert!((numeric - analytic).abs() < 1e-8, "{act:?} at {x}");
            }
        }
    }
}
