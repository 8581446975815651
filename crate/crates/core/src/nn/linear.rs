//! Fully connected layer for the extractor's classifier heads.

use ndarray::{Array1, Array2, Axis};

use super::matmul::par_matmul;
use crate::num::Real;

#[derive(Debug, Clone)]
pub struct Linear<T: Real> {
    /// `(out_features, in_features)`
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct LinearGrad<T: Real> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let mut y = par_matmul(x.view(), self.weight.t());
        for mut row in y.axis_iter_mut(Axis(0)) {
            row += &self.bias;
        }
        y
    }

    pub fn backward(
        &self,
        x: &Array2<T>,
        gout: &Array2<T>,
        input_grad: bool,
    ) -> (Option<Array2<T>>, LinearGrad<T>) {
        let dw = par_matmul(gout.t(), x.view());
        let db = gout.sum_axis(Axis(0));
        let dx = input_grad.then(|| par_matmul(gout.view(), self.weight.view()));
        (dx, LinearGrad { weight: dw, bias: db })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn forward_matches_hand_computation() {
        let lin = Linear {
            weight: array![[1.0f64, 2.0], [0.0, -1.0]],
            bias: array![0.5, 1.0],
        };
        let x = array![[3.0, 4.0]];
        assert_eq!(lin.forward(&x), array![[11.5, -3.0]]);
    }
}
