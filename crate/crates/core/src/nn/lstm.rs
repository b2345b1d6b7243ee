//! Long short-term memory layer without peephole connections.
//!
//! ```text
//! i = σ(x W_i + h U_i + b_i)        f = σ(x W_f + h U_f + b_f)
//! o = σ(x W_o + h U_o + b_o)        g = act(x W_g + h U_g + b_g)
//! c' = f ⊙ c + i ⊙ g                h' = o ⊙ act(c')
//! ```
//!
//! The four gates are packed column-wise in the order `[i | f | o | g]`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::init::{glorot_uniform, orthogonal};
use super::{sigmoid, Activation, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LstmGate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// `(in, 4 * units)`
    pub w: Array2<f64>,
    /// `(units, 4 * units)`
    pub u: Array2<f64>,
    pub b: Array1<f64>,
    /// Candidate and cell-output nonlinearity; gates are always sigmoid.
    pub activation: Activation,
}

/// Everything the backward pass needs from a forward pass over a sequence.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub batch: usize,
    pub xs: Array2<f64>,
    /// Activated gates, `(steps * batch, 4 * units)`.
    pub gates: Array2<f64>,
    pub cells: Array2<f64>,
    pub act_cells: Array2<f64>,
    pub hidden: Array2<f64>,
}

impl LstmCache {
    pub fn steps(&self) -> usize {
        self.xs.nrows() / self.batch
    }

    /// Hidden states of the last step, `(batch, units)`.
    pub fn last_hidden(&self) -> ArrayView2<'_, f64> {
        let n = self.hidden.nrows();
        self.hidden.slice(s![n - self.batch.., ..])
    }
}

impl Lstm {
    pub fn new<R: Rng>(rng: &mut R, input: usize, units: usize, activation: Activation) -> Self {
        let w = glorot_uniform(rng, input, 4 * units);
        let u = orthogonal(rng, units, 4 * units);
        let mut b = Array1::zeros(4 * units);
        b.slice_mut(s![units..2 * units]).fill(1.0);
        Self { w, u, b, activation }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            u: Array2::zeros(self.u.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            activation: self.activation,
        }
    }

    pub fn units(&self) -> usize {
        self.u.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Input weights of one gate, `(in, units)`.
    pub fn gate_input_weights(&self, gate: LstmGate) -> ArrayView2<'_, f64> {
        let n = self.units();
        let k = gate as usize;
        self.w.slice(s![.., k * n..(k + 1) * n])
    }

    /// Recurrent weights of one gate, `(units, units)`.
    pub fn gate_recurrent_weights(&self, gate: LstmGate) -> ArrayView2<'_, f64> {
        let n = self.units();
        let k = gate as usize;
        self.u.slice(s![.., k * n..(k + 1) * n])
    }

    pub fn gate_bias(&self, gate: LstmGate) -> ndarray::ArrayView1<'_, f64> {
        let n = self.units();
        let k = gate as usize;
        self.b.slice(s![k * n..(k + 1) * n])
    }

    /// Runs a step-major sequence `(steps * batch, in)` through the layer
    /// from zero initial state.
    pub fn forward_seq(&self, xs: ArrayView2<'_, f64>, batch: usize) -> Result<LstmCache> {
        if xs.ncols() != self.input_dim() {
            return Err(Error::shape(format!("{} input columns", self.input_dim()), xs.ncols()));
        }
        if batch == 0 || xs.nrows() % batch != 0 {
            return Err(Error::shape(format!("rows divisible by batch {batch}"), xs.nrows()));
        }
        let n = self.units();
        let steps = xs.nrows() / batch;
        let mut gates = xs.dot(&self.w);
        gates += &self.b;
        let mut cells = Array2::zeros((xs.nrows(), n));
        let mut act_cells = Array2::zeros((xs.nrows(), n));
        let mut hidden = Array2::<f64>::zeros((xs.nrows(), n));
        let act = self.activation;
        for t in 0..steps {
            let rows = t * batch..(t + 1) * batch;
            if t > 0 {
                let prev = (t - 1) * batch..t * batch;
                let h_prev = hidden.slice(s![prev, ..]);
                let mut block = gates.slice_mut(s![rows.clone(), ..]);
                general_mat_mul(1.0, &h_prev, &self.u, 1.0, &mut block);
            }
            for r in rows {
                let g = gates.row_mut(r).into_slice().expect("standard layout");
                let (c_prev, mut c_row) = if t > 0 {
                    let (p, c) = cells.multi_slice_mut((s![r - batch, ..], s![r, ..]));
                    (Some(p), c)
                } else {
                    (None, cells.row_mut(r))
                };
                let a_row = act_cells.row_mut(r).into_slice().expect("standard layout");
                let h_row = hidden.row_mut(r).into_slice().expect("standard layout");
                for j in 0..n {
                    let i = sigmoid(g[j]);
                    let f = sigmoid(g[n + j]);
                    let o = sigmoid(g[2 * n + j]);
                    let cand = act.apply(g[3 * n + j]);
                    g[j] = i;
                    g[n + j] = f;
                    g[2 * n + j] = o;
                    g[3 * n + j] = cand;
                    let prev = c_prev.as_ref().map_or(0.0, |c| c[j]);
                    let c = f * prev + i * cand;
                    let ac = act.apply(c);
                    c_row[j] = c;
                    a_row[j] = ac;
                    h_row[j] = o * ac;
                }
            }
        }
        Ok(LstmCache {
            batch,
            xs: xs.to_owned(),
            gates,
            cells,
            act_cells,
            hidden,
        })
    }

    /// Backpropagation through time. `d_hidden` is `dL/dh_t` for every step
    /// (rows laid out like `cache.hidden`). Gradients accumulate into `grad`;
    /// returns `dL/dxs`.
    pub fn backward_seq(&self, cache: &LstmCache, d_hidden: ArrayView2<'_, f64>, grad: &mut Lstm) -> Array2<f64> {
        let n = self.units();
        let batch = cache.batch;
        let steps = cache.steps();
        let act = self.activation;
        let mut dz = Array2::<f64>::zeros((steps * batch, 4 * n));
        let mut dh_next = Array2::<f64>::zeros((batch, n));
        let mut dc_next = Array2::<f64>::zeros((batch, n));
        for t in (0..steps).rev() {
            for b in 0..batch {
                let r = t * batch + b;
                let g = cache.gates.row(r);
                let g = g.as_slice().expect("standard layout");
                let dh_out = d_hidden.row(r);
                let ac = cache.act_cells.row(r);
                let dzr = dz.row_mut(r).into_slice().expect("standard layout");
                for j in 0..n {
                    let (i, f, o, cand) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                    let c_prev = if t > 0 { cache.cells[[r - batch, j]] } else { 0.0 };
                    let dh = dh_out[j] + dh_next[[b, j]];
                    let d_o = dh * ac[j];
                    let dc = dc_next[[b, j]] + dh * o * act.derivative_from_output(ac[j]);
                    dzr[j] = dc * cand * i * (1.0 - i);
                    dzr[n + j] = dc * c_prev * f * (1.0 - f);
                    dzr[2 * n + j] = d_o * o * (1.0 - o);
                    dzr[3 * n + j] = dc * i * act.derivative_from_output(cand);
                    dc_next[[b, j]] = dc * f;
                }
            }
            let block = dz.slice(s![t * batch..(t + 1) * batch, ..]);
            if t > 0 {
                let h_prev = cache.hidden.slice(s![(t - 1) * batch..t * batch, ..]);
                general_mat_mul(1.0, &h_prev.t(), &block, 1.0, &mut grad.u);
                dh_next = block.dot(&self.u.t());
            }
        }
        general_mat_mul(1.0, &cache.xs.t(), &dz, 1.0, &mut grad.w);
        grad.b += &dz.sum_axis(Axis(0));
        dz.dot(&self.w.t())
    }
}

impl Parameters for Lstm {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        vec![self.w.view().into_dyn(), self.u.view().into_dyn(), self.b.view().into_dyn()]
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![
            self.w.view_mut().into_dyn(),
            self.u.view_mut().into_dyn(),
            self.b.view_mut().into_dyn(),
        ]
    }
}

/// One LSTM step for a single sample; returns `(h_t, c_t)`.
pub fn lstm_step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &Lstm) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.units();
    if x.len() != p.input_dim() {
        return Err(Error::shape(format!("input of length {}", p.input_dim()), x.len()));
    }
    if h_prev.len() != n || c_prev.len() != n {
        return Err(Error::shape(format!("state of length {n}"), h_prev.len().max(c_prev.len())));
    }
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
    let hv = ArrayView2::from_shape((1, n), h_prev).expect("row");
    let mut z = xv.dot(&p.w) + hv.dot(&p.u);
    z += &p.b;
    let z = z.row(0);
    let act = p.activation;
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for j in 0..n {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[n + j]);
        let o = sigmoid(z[2 * n + j]);
        let g = act.apply(z[3 * n + j]);
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * act.apply(c[j]);
    }
    Ok((h, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_lstm(input: usize, units: usize) -> Lstm {
        Lstm {
            w: Array2::zeros((input, 4 * units)),
            u: Array2::zeros((units, 4 * units)),
            b: Array1::zeros(4 * units),
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let p = zero_lstm(3, 2);
        let (h, c) = lstm_step(&[0.0; 3], &[0.0; 2], &[0.0; 2], &p).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_retains_memory() {
        let mut p = zero_lstm(2, 2);
        // forget gate fully open, input gate closed
        p.b.slice_mut(s![2..4]).fill(50.0);
        p.b.slice_mut(s![0..2]).fill(-50.0);
        let (_, c) = lstm_step(&[0.3, -0.7], &[0.1, 0.2], &[0.8, -1.5], &p).unwrap();
        assert!((c[0] - 0.8).abs() < 1e-12);
        assert!((c[1] + 1.5).abs() < 1e-12);
    }

    /// Written out unit by unit with scalar arithmetic only.
    fn scalar_oracle(x: &[f64], h: &[f64], c: &[f64], p: &Lstm) -> (Vec<f64>, Vec<f64>) {
        let n = h.len();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |col: usize| {
            let mut acc = p.b[col];
            for (k, xv) in x.iter().enumerate() {
                acc += xv * p.w[[k, col]];
            }
            for (k, hv) in h.iter().enumerate() {
                acc += hv * p.u[[k, col]];
            }
            acc
        };
        let mut h_out = Vec::new();
        let mut c_out = Vec::new();
        for j in 0..n {
            let i = sig(pre(j));
            let f = sig(pre(n + j));
            let o = sig(pre(2 * n + j));
            let g = pre(3 * n + j).tanh();
            let c_new = f * c[j] + i * g;
            c_out.push(c_new);
            h_out.push(o * c_new.tanh());
        }
        (h_out, c_out)
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = Lstm::new(&mut rng, 3, 2, Activation::Tanh);
        p.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        let (x, h, c) = ([0.4, -1.2, 0.9], [0.3, -0.2], [0.5, 1.1]);
        let (h1, c1) = lstm_step(&x, &h, &c, &p).unwrap();
        let (h2, c2) = scalar_oracle(&x, &h, &c, &p);
        for j in 0..2 {
            assert!((h1[j] - h2[j]).abs() < 1e-14);
            assert!((c1[j] - c2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn sequence_forward_agrees_with_single_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = Lstm::new(&mut rng, 3, 4, Activation::Relu);
        let (steps, batch) = (3, 2);
        let xs = Array2::from_shape_simple_fn((steps * batch, 3), || rng.random_range(-1.0..1.0));
        let cache = p.forward_seq(xs.view(), batch).unwrap();
        for b in 0..batch {
            let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
            for t in 0..steps {
                let x: Vec<f64> = xs.row(t * batch + b).to_vec();
                (h, c) = lstm_step(&x, &h, &c, &p).unwrap();
                for j in 0..4 {
                    assert!((cache.hidden[[t * batch + b, j]] - h[j]).abs() < 1e-14);
                }
            }
        }
        assert_eq!(cache.last_hidden().dim(), (batch, 4));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = Lstm::new(&mut rng, 2, 3, Activation::Relu);
        assert!(p.gate_bias(LstmGate::Forget).iter().all(|&v| v == 1.0));
        assert!(p.gate_bias(LstmGate::Input).iter().all(|&v| v == 0.0));
        assert_eq!(p.gate_input_weights(LstmGate::Output).dim(), (2, 3));
        assert_eq!(p.gate_recurrent_weights(LstmGate::Candidate).dim(), (3, 3));
    }

    #[test]
    fn step_shape_errors() {
        let p = zero_lstm(3, 2);
        assert!(lstm_step(&[0.0; 2], &[0.0; 2], &[0.0; 2], &p).is_err());
        assert!(lstm_step(&[0.0; 3], &[0.0; 3], &[0.0; 2], &p).is_err());
    }
}
