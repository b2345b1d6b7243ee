//! Weight initializers.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

/// Glorot/Xavier uniform: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..=limit))
}

/// Matrix with orthonormal rows or columns (whichever is shorter), from the
/// QR factorization of a Gaussian matrix with the sign of `diag(R)` folded in.
pub fn orthogonal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let mut q = Array2::from_shape_simple_fn((tall, short), || rng.sample::<f64, _>(StandardNormal));
    // modified Gram-Schmidt; a Gaussian matrix is full rank with probability 1
    for j in 0..short {
        for k in 0..j {
            let proj = q.column(j).dot(&q.column(k));
            let qk = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-proj, &qk);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    if rows >= cols {
        q
    } else {
        q.reversed_axes().as_standard_layout().to_owned()
    }
}

/// Largest absolute deviation of `m mᵀ` (or `mᵀ m`) from the identity.
pub fn orthogonality_error(m: &Array2<f64>) -> f64 {
    let gram = if m.nrows() <= m.ncols() { m.dot(&m.t()) } else { m.t().dot(m) };
    let n = gram.len_of(Axis(0));
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[[i, j]] - target).abs());
        }
    }
    worst
}
