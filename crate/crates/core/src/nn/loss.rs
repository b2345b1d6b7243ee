use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Mean squared error over classes and its gradient `2 (s - t) / n`.
pub fn mse_loss(scores: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if scores.len() != target.len() {
        return Err(Error::shape(format!("target of length {}", scores.len()), target.len()));
    }
    let n = scores.len() as f64;
    let loss = scores.iter().zip(target).map(|(s, t)| (s - t).powi(2)).sum::<f64>() / n;
    let grad = scores.iter().zip(target).map(|(s, t)| 2.0 * (s - t) / n).collect();
    Ok((loss, grad))
}

/// Batch version: per-sample MSE averaged over rows.
pub fn mse_loss_batch(scores: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    if scores.dim() != targets.dim() {
        return Err(Error::shape(format!("{:?}", scores.dim()), format!("{:?}", targets.dim())));
    }
    let count = scores.len() as f64;
    let diff = &scores - &targets;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff * (2.0 / count)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_prediction_is_zero() {
        let (l, g) = mse_loss(&[0.2, 0.8], &[0.2, 0.8]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn swapped_one_hot_is_one() {
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap().0, 1.0);
        assert!(mse_loss(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let scores = [0.31, 0.77, 0.05, 0.49];
        let target = [0.0, 1.0, 0.0, 0.0];
        let (_, grad) = mse_loss(&scores, &target).unwrap();
        let h = 1e-5;
        for k in 0..scores.len() {
            let mut up = scores;
            let mut down = scores;
            up[k] += h;
            down[k] -= h;
            let numeric = (mse_loss(&up, &target).unwrap().0 - mse_loss(&down, &target).unwrap().0) / (2.0 * h);
            let rel = (numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-12);
            assert!(rel < 1e-8, "component {k}: rel {rel}");
        }
    }

    #[test]
    fn batch_loss_averages_rows() {
        let s = array![[1.0, 0.0], [0.5, 0.5]];
        let t = array![[0.0, 1.0], [0.5, 0.5]];
        let (l, g) = mse_loss_batch(s.view(), t.view()).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, array![[0.5, -0.5], [0.0, 0.0]]);
    }
}
