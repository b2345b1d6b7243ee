//! Gated recurrent unit, reset gate applied before the recurrent product.
//!
//! ```text
//! z = σ(x W_z + h U_z + b_z)        r = σ(x W_r + h U_r + b_r)
//! ĥ = act(x W_h + (r ⊙ h) U_h + b_h)
//! h' = (1 - z) ⊙ h + z ⊙ ĥ
//! ```
//!
//! Gates are packed column-wise as `[z | r | ĥ]`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::init::{glorot_uniform, orthogonal};
use super::{sigmoid, Activation, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GruGate {
    Update = 0,
    Reset = 1,
    Candidate = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    /// `(in, 3 * units)`
    pub w: Array2<f64>,
    /// `(units, 3 * units)`
    pub u: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    pub batch: usize,
    pub xs: Array2<f64>,
    /// Activated `[z | r | ĥ]`, `(steps * batch, 3 * units)`.
    pub gates: Array2<f64>,
    /// `r ⊙ h_prev` per step.
    pub reset_hidden: Array2<f64>,
    pub hidden: Array2<f64>,
}

impl GruCache {
    pub fn steps(&self) -> usize {
        self.xs.nrows() / self.batch
    }

    pub fn last_hidden(&self) -> ArrayView2<'_, f64> {
        let n = self.hidden.nrows();
        self.hidden.slice(s![n - self.batch.., ..])
    }
}

impl Gru {
    pub fn new<R: Rng>(rng: &mut R, input: usize, units: usize, activation: Activation) -> Self {
        Self {
            w: glorot_uniform(rng, input, 3 * units),
            u: orthogonal(rng, units, 3 * units),
            b: Array1::zeros(3 * units),
            activation,
        }
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

    pub fn gate_input_weights(&self, gate: GruGate) -> ArrayView2<'_, f64> {
        let n = self.units();
        let k = gate as usize;
        self.w.slice(s![.., k * n..(k + 1) * n])
    }

    pub fn gate_recurrent_weights(&self, gate: GruGate) -> ArrayView2<'_, f64> {
        let n = self.units();
        let k = gate as usize;
        self.u.slice(s![.., k * n..(k + 1) * n])
    }

    pub fn forward_seq(&self, xs: ArrayView2<'_, f64>, batch: usize) -> Result<GruCache> {
        if xs.ncols() != self.input_dim() {
            return Err(Error::shape(format!("{} input columns", self.input_dim()), xs.ncols()));
        }
        if batch == 0 || xs.nrows() % batch != 0 {
            return Err(Error::shape(format!("rows divisible by batch {batch}"), xs.nrows()));
        }
        let n = self.units();
        let steps = xs.nrows() / batch;
        let act = self.activation;
        let mut gates = xs.dot(&self.w);
        gates += &self.b;
        let mut reset_hidden = Array2::<f64>::zeros((xs.nrows(), n));
        let mut hidden = Array2::<f64>::zeros((xs.nrows(), n));
        let u_zr = self.u.slice(s![.., ..2 * n]);
        let u_h = self.u.slice(s![.., 2 * n..]);
        for t in 0..steps {
            let rows = t * batch..(t + 1) * batch;
            if t > 0 {
                let h_prev = hidden.slice(s![(t - 1) * batch..t * batch, ..]);
                let mut zr = gates.slice_mut(s![rows.clone(), ..2 * n]);
                general_mat_mul(1.0, &h_prev, &u_zr, 1.0, &mut zr);
            }
            for r in rows.clone() {
                let g = gates.row_mut(r).into_slice().expect("standard layout");
                let rh = reset_hidden.row_mut(r).into_slice().expect("standard layout");
                for j in 0..n {
                    g[j] = sigmoid(g[j]);
                    g[n + j] = sigmoid(g[n + j]);
                    let h_prev = if t > 0 { hidden[[r - batch, j]] } else { 0.0 };
                    rh[j] = g[n + j] * h_prev;
                }
            }
            if t > 0 {
                let rh = reset_hidden.slice(s![rows.clone(), ..]);
                let mut cand = gates.slice_mut(s![rows.clone(), 2 * n..]);
                general_mat_mul(1.0, &rh, &u_h, 1.0, &mut cand);
            }
            for r in rows {
                let g = gates.row_mut(r).into_slice().expect("standard layout");
                let (h_prev, mut h_row) = if t > 0 {
                    let (p, c) = hidden.multi_slice_mut((s![r - batch, ..], s![r, ..]));
                    (Some(p), c)
                } else {
                    (None, hidden.row_mut(r))
                };
                for j in 0..n {
                    let cand = act.apply(g[2 * n + j]);
                    g[2 * n + j] = cand;
                    let z = g[j];
                    let hp = h_prev.as_ref().map_or(0.0, |h| h[j]);
                    h_row[j] = (1.0 - z) * hp + z * cand;
                }
            }
        }
        Ok(GruCache {
            batch,
            xs: xs.to_owned(),
            gates,
            reset_hidden,
            hidden,
        })
    }

    /// Backpropagation through time; see [`super::Lstm::backward_seq`].
    pub fn backward_seq(&self, cache: &GruCache, d_hidden: ArrayView2<'_, f64>, grad: &mut Gru) -> Array2<f64> {
        let n = self.units();
        let batch = cache.batch;
        let steps = cache.steps();
        let act = self.activation;
        let u_zr = self.u.slice(s![.., ..2 * n]);
        let u_h = self.u.slice(s![.., 2 * n..]);
        let mut dz = Array2::<f64>::zeros((steps * batch, 3 * n));
        let mut dh_next = Array2::<f64>::zeros((batch, n));
        let mut dh_total = Array2::<f64>::zeros((batch, n));
        for t in (0..steps).rev() {
            let h_prev_at = |r: usize, j: usize| if t > 0 { cache.hidden[[r - batch, j]] } else { 0.0 };
            // update gate and candidate terms
            for b in 0..batch {
                let r = t * batch + b;
                let g = cache.gates.row(r);
                let g = g.as_slice().expect("standard layout");
                let dzr = dz.row_mut(r).into_slice().expect("standard layout");
                for j in 0..n {
                    let (z, cand) = (g[j], g[2 * n + j]);
                    let hp = h_prev_at(r, j);
                    let dh = d_hidden[[r, j]] + dh_next[[b, j]];
                    dh_total[[b, j]] = dh;
                    dzr[j] = dh * (cand - hp) * z * (1.0 - z);
                    dzr[2 * n + j] = dh * z * act.derivative_from_output(cand);
                }
            }
            let rows = t * batch..(t + 1) * batch;
            let d_cand = dz.slice(s![rows.clone(), 2 * n..]);
            let rh = cache.reset_hidden.slice(s![rows.clone(), ..]);
            let mut gu_h = grad.u.slice_mut(s![.., 2 * n..]);
            general_mat_mul(1.0, &rh.t(), &d_cand, 1.0, &mut gu_h);
            let d_rh = d_cand.dot(&u_h.t());
            let mut dh_prev = Array2::<f64>::zeros((batch, n));
            for b in 0..batch {
                let r = t * batch + b;
                for j in 0..n {
                    let (z, reset) = (cache.gates[[r, j]], cache.gates[[r, n + j]]);
                    let hp = h_prev_at(r, j);
                    dz[[r, n + j]] = d_rh[[b, j]] * hp * reset * (1.0 - reset);
                    dh_prev[[b, j]] = dh_total[[b, j]] * (1.0 - z) + d_rh[[b, j]] * reset;
                }
            }
            if t > 0 {
                let d_zr = dz.slice(s![rows, ..2 * n]);
                let h_prev = cache.hidden.slice(s![(t - 1) * batch..t * batch, ..]);
                let mut gu_zr = grad.u.slice_mut(s![.., ..2 * n]);
                general_mat_mul(1.0, &h_prev.t(), &d_zr, 1.0, &mut gu_zr);
                general_mat_mul(1.0, &d_zr, &u_zr.t(), 1.0, &mut dh_prev);
            }
            dh_next = dh_prev;
        }
        general_mat_mul(1.0, &cache.xs.t(), &dz, 1.0, &mut grad.w);
        grad.b += &dz.sum_axis(Axis(0));
        dz.dot(&self.w.t())
    }
}

impl Parameters for Gru {
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

/// One GRU step for a single sample.
pub fn gru_step(x: &[f64], h_prev: &[f64], p: &Gru) -> Result<Vec<f64>> {
    let n = p.units();
    if x.len() != p.input_dim() {
        return Err(Error::shape(format!("input of length {}", p.input_dim()), x.len()));
    }
    if h_prev.len() != n {
        return Err(Error::shape(format!("state of length {n}"), h_prev.len()));
    }
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
    let hv = ArrayView2::from_shape((1, n), h_prev).expect("row");
    let mut zx = xv.dot(&p.w);
    zx += &p.b;
    let zr = &zx.slice(s![.., ..2 * n]) + &hv.dot(&p.u.slice(s![.., ..2 * n]));
    let z: Vec<f64> = zr.iter().take(n).map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = zr.iter().skip(n).map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let rhv = ArrayView2::from_shape((1, n), &rh).expect("row");
    let cand = &zx.slice(s![.., 2 * n..]) + &rhv.dot(&p.u.slice(s![.., 2 * n..]));
    Ok((0..n)
        .map(|j| {
            let c = p.activation.apply(cand[[0, j]]);
            (1.0 - z[j]) * h_prev[j] + z[j] * c
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_gru(input: usize, units: usize) -> Gru {
        Gru {
            w: Array2::zeros((input, 3 * units)),
            u: Array2::zeros((units, 3 * units)),
            b: Array1::zeros(3 * units),
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let p = zero_gru(3, 2);
        assert_eq!(gru_step(&[0.0; 3], &[0.0; 2], &p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn closed_update_gate_keeps_state() {
        let mut p = zero_gru(2, 2);
        p.b.slice_mut(s![0..2]).fill(-50.0);
        p.w.fill(0.3);
        let h = gru_step(&[1.0, -2.0], &[0.7, -0.4], &p).unwrap();
        assert!((h[0] - 0.7).abs() < 1e-12);
        assert!((h[1] + 0.4).abs() < 1e-12);
    }

    fn scalar_oracle(x: &[f64], h: &[f64], p: &Gru) -> Vec<f64> {
        let n = h.len();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let input = |col: usize| {
            let mut acc = p.b[col];
            for (k, xv) in x.iter().enumerate() {
                acc += xv * p.w[[k, col]];
            }
            acc
        };
        let recur = |col: usize, state: &[f64]| {
            let mut acc = 0.0;
            for (k, hv) in state.iter().enumerate() {
                acc += hv * p.u[[k, col]];
            }
            acc
        };
        let z: Vec<f64> = (0..n).map(|j| sig(input(j) + recur(j, h))).collect();
        let r: Vec<f64> = (0..n).map(|j| sig(input(n + j) + recur(n + j, h))).collect();
        let rh: Vec<f64> = (0..n).map(|j| r[j] * h[j]).collect();
        (0..n)
            .map(|j| {
                let c = (input(2 * n + j) + recur(2 * n + j, &rh)).tanh();
                (1.0 - z[j]) * h[j] + z[j] * c
            })
            .collect()
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = Gru::new(&mut rng, 3, 2, Activation::Tanh);
        p.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        let (x, h) = ([0.4, -1.2, 0.9], [0.3, -0.2]);
        let got = gru_step(&x, &h, &p).unwrap();
        let want = scalar_oracle(&x, &h, &p);
        for j in 0..2 {
            assert!((got[j] - want[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn sequence_forward_agrees_with_single_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Gru::new(&mut rng, 3, 4, Activation::Relu);
        let (steps, batch) = (4, 3);
        let xs = Array2::from_shape_simple_fn((steps * batch, 3), || rng.random_range(-1.0..1.0));
        let cache = p.forward_seq(xs.view(), batch).unwrap();
        for b in 0..batch {
            let mut h = vec![0.0; 4];
            for t in 0..steps {
                h = gru_step(&xs.row(t * batch + b).to_vec(), &h, &p).unwrap();
                for j in 0..4 {
                    assert!((cache.hidden[[t * batch + b, j]] - h[j]).abs() < 1e-14);
                }
            }
        }
        assert_eq!(p.gate_input_weights(GruGate::Reset).dim(), (3, 4));
        assert_eq!(p.gate_recurrent_weights(GruGate::Update).dim(), (4, 4));
    }
}
