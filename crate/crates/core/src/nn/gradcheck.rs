//! Central-difference verification of the analytic gradients.

use ndarray::{Array2, ArrayView2};

use super::{Model, Parameters};
use crate::error::Result;

/// Default finite-difference step.
pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |a - n| / max(|a|, |n|, 1e-12)` over every parameter.
    pub max_rel_error: f64,
    /// Largest absolute disagreement, useful when the relative figure is
    /// dominated by near-zero components.
    pub max_abs_error: f64,
    /// `(tensor name, flat index)` of the worst relative error.
    pub worst: (String, usize),
    pub checked: usize,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Component {
    pub fn relative_error(&self) -> f64 {
        relative_error(self.analytic, self.numeric)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares backpropagated gradients of the batch MSE loss with central
/// differences, perturbing every parameter of `model` in turn. A fixed
/// `mask` makes dropout deterministic.
pub fn gradient_check(
    model: &Model,
    x: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    mask: Option<&Array2<f64>>,
    step: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_gradients(x, targets, mask.cloned())?;
    let names = model.net.tensor_names();
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.iter().copied().collect()).collect();

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
        components: Vec::new(),
    };
    for (k, grads) in analytic.iter().enumerate() {
        for (e, &a) in grads.iter().enumerate() {
            let original = flat_get(&probe, k, e);
            flat_set(&mut probe, k, e, original + step);
            let up = probe.loss(x, targets, mask.cloned())?;
            flat_set(&mut probe, k, e, original - step);
            let down = probe.loss(x, targets, mask.cloned())?;
            flat_set(&mut probe, k, e, original);

            let numeric = (up - down) / (2.0 * step);
            let rel = relative_error(a, numeric);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (names[k].clone(), e);
            }
            report.checked += 1;
            report.components.push(Component {
                tensor: k,
                index: e,
                analytic: a,
                numeric,
            });
        }
    }
    Ok(report)
}

fn flat_get(model: &Model, tensor: usize, index: usize) -> f64 {
    model.net.tensors()[tensor].as_slice().expect("standard layout")[index]
}

fn flat_set(model: &mut Model, tensor: usize, index: usize, value: f64) {
    let mut tensors = model.net.tensors_mut();
    tensors[tensor].as_slice_mut().expect("standard layout")[index] = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{one_hot, SequenceLayout};
    use crate::nn::{Activation, ModelKind, ModelSpec, RmsPropConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Case {
        model: Model,
        x: Array2<f64>,
        t: Array2<f64>,
        mask: Option<Array2<f64>>,
    }

    fn case(kind: ModelKind, activation: Activation, seed: u64) -> Case {
        let spec = ModelSpec {
            kind,
            steps: 3,
            per_step_dim: 3,
            layout: SequenceLayout::Contiguous,
            hidden: [4, 5],
            dropout: 0.2,
            n_classes: 3,
            epochs: 1,
            batch_size: 2,
            activation,
            optimizer: RmsPropConfig::default(),
            seed,
        };
        let model = Model::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x = Array2::from_shape_simple_fn((2, 9), || rng.random_range(-1.0..1.0));
        let t = one_hot(&[0, 2], 3);
        let mask = model.draw_mask(&mut rng, 2);
        Case { model, x, t, mask }
    }

    fn run(c: &Case) -> GradCheckReport {
        gradient_check(&c.model, c.x.view(), c.t.view(), c.mask.as_ref(), STEP).unwrap()
    }

    /// Agreement up to the f64 floor of a central difference with this step.
    fn close(a: f64, n: f64) -> bool {
        (a - n).abs() <= 1e-6 * a.abs().max(n.abs()) + 1e-9
    }

    #[test]
    fn logistic_regression_is_tight() {
        for seed in 0..5 {
            let r = run(&case(ModelKind::Lr, Activation::Relu, seed));
            assert!(r.max_rel_error < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn smooth_recurrent_stacks_agree() {
        for kind in [ModelKind::Lstm, ModelKind::Gru] {
            for seed in 0..5 {
                let r = run(&case(kind, Activation::Tanh, seed));
                assert!(r.max_abs_error < 1e-9, "{kind} seed {seed}: {}", r.max_abs_error);
                assert!(r.components.iter().all(|c| close(c.analytic, c.numeric)));
            }
        }
    }

    /// Away from kinks ReLU stacks agree like smooth ones. Where a
    /// perturbation crosses a kink, backprop must reproduce one of the
    /// one-sided slopes.
    #[test]
    fn relu_recurrent_stacks_agree_up_to_kinks() {
        for kind in [ModelKind::Lstm, ModelKind::Gru] {
            for seed in 0..5 {
                let c = case(kind, Activation::Relu, seed);
                let r = run(&c);
                let base = c.model.loss(c.x.view(), c.t.view(), c.mask.clone()).unwrap();
                let mut probe = c.model.clone();
                for comp in r.components.iter().filter(|p| !close(p.analytic, p.numeric)) {
                    let original = flat_get(&probe, comp.tensor, comp.index);
                    flat_set(&mut probe, comp.tensor, comp.index, original + STEP);
                    let up = probe.loss(c.x.view(), c.t.view(), c.mask.clone()).unwrap();
                    flat_set(&mut probe, comp.tensor, comp.index, original - STEP);
                    let down = probe.loss(c.x.view(), c.t.view(), c.mask.clone()).unwrap();
                    flat_set(&mut probe, comp.tensor, comp.index, original);
                    let forward = (up - base) / STEP;
                    let backward = (base - down) / STEP;
                    let miss = (comp.analytic - forward).abs().min((comp.analytic - backward).abs());
                    assert!(
                        miss <= 1e-3 * comp.analytic.abs().max(1e-6),
                        "{kind} seed {seed} {comp:?}: one-sided {forward} / {backward}"
                    );
                }
            }
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 0.5), 0.5);
        assert!((relative_error(1e-13, 0.0) - 0.1).abs() < 1e-15);
    }
}
