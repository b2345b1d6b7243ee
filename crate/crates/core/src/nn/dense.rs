use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis, Zip};
use rand::Rng;

use super::init::glorot_uniform;
use super::{Activation, Parameters};
use crate::error::{Error, Result};

/// Fully connected layer. The weight is stored `(in, out)` so a batch with
/// one sample per row maps through `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new<R: Rng>(rng: &mut R, input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: glorot_uniform(rng, input, output),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(
                format!("{} input columns", self.input_dim()),
                x.ncols(),
            ));
        }
        let mut z = x.dot(&self.weight);
        z += &self.bias;
        let act = self.activation;
        if act != Activation::Linear {
            z.mapv_inplace(|v| act.apply(v));
        }
        Ok(z)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    /// `y` is this layer's forward output for input `x`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        dy: ArrayView2<'_, f64>,
        grad: &mut Dense,
    ) -> Array2<f64> {
        let act = self.activation;
        let dz = if act == Activation::Linear {
            dy.to_owned()
        } else {
            let mut dz = dy.to_owned();
            Zip::from(&mut dz)
                .and(&y)
                .for_each(|d, &out| *d *= act.derivative_from_output(out));
            dz
        };
        grad.weight += &x.t().dot(&dz);
        grad.bias += &dz.sum_axis(Axis(0));
        dz.dot(&self.weight.t())
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        vec![self.weight.view().into_dyn(), self.bias.view().into_dyn()]
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![self.weight.view_mut().into_dyn(), self.bias.view_mut().into_dyn()]
    }
}

/// `activation(W x + b)` for a single input vector.
pub fn dense_forward(x: &[f64], layer: &Dense) -> Result<Vec<f64>> {
    let row = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
    Ok(layer.forward(row)?.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn layer(weight: Array2<f64>, activation: Activation) -> Dense {
        let n = weight.ncols();
        Dense {
            weight,
            bias: Array1::zeros(n),
            activation,
        }
    }

    #[test]
    fn identity_linear() {
        let d = layer(Array2::eye(3), Activation::Linear);
        assert_eq!(dense_forward(&[1.0, -2.0, 3.5], &d).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn zero_sigmoid_is_half() {
        let d = layer(Array2::zeros((3, 2)), Activation::Sigmoid);
        assert_eq!(dense_forward(&[4.0, 5.0, 6.0], &d).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn relu_zeroes_negatives() {
        let d = layer(Array2::eye(3), Activation::Relu);
        assert_eq!(dense_forward(&[-1.0, 2.0, -0.5], &d).unwrap(), vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn shape_mismatch() {
        let d = layer(Array2::eye(3), Activation::Relu);
        assert!(matches!(dense_forward(&[1.0], &d), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_linear_shapes() {
        let d = layer(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], Activation::Linear);
        let x = array![[1.0, 0.0, -1.0]];
        let y = d.forward(x.view()).unwrap();
        let mut g = d.zeros_like();
        let dx = d.backward(x.view(), y.view(), array![[1.0, 1.0]].view(), &mut g);
        assert_eq!(dx, array![[3.0, 7.0, 11.0]]);
        assert_eq!(g.weight, array![[1.0, 1.0], [0.0, 0.0], [-1.0, -1.0]]);
        assert_eq!(g.bias, array![1.0, 1.0]);
    }
}
