//! Batch normalization over NCHW activations.

use ndarray::{Array1, Array4};

use crate::num::Real;

#[derive(Debug, Clone)]
pub struct BatchNorm2d<T: Real> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
    pub eps: T,
    pub momentum: T,
}

#[derive(Debug, Clone)]
pub struct BnCache<T: Real> {
    /// Normalized activations; kept only in training mode where the
    /// gamma gradient needs them.
    xhat: Option<Array4<T>>,
    inv_std: Array1<T>,
    train_mode: bool,
}

#[derive(Debug, Clone)]
pub struct BnGrad<T: Real> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            eps: T::of(1e-5),
            momentum: T::of(0.1),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Training forward: normalizes with batch statistics and updates the
    /// running estimates (biased variance, momentum 0.1).
    pub fn forward_train(&mut self, x: &Array4<T>) -> (Array4<T>, BnCache<T>) {
        let (n, c, h, w) = x.dim();
        let count = T::of_usize(n * h * w);
        let xs = x.as_slice().expect("contiguous input");
        let hw = h * w;

        let mut mean = Array1::<T>::zeros(c);
        let mut var = Array1::<T>::zeros(c);
        for ci in 0..c {
            let mut acc = T::zero();
            for ni in 0..n {
                for &v in &xs[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                    acc += v;
                }
            }
            let m = acc / count;
            mean[ci] = m;
            let mut vacc = T::zero();
            for ni in 0..n {
                for &v in &xs[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                    let d = v - m;
                    vacc += d * d;
                }
            }
            var[ci] = vacc / count;
        }

        let one = T::one();
        for ci in 0..c {
            self.running_mean[ci] =
                (one - self.momentum) * self.running_mean[ci] + self.momentum * mean[ci];
            self.running_var[ci] =
                (one - self.momentum) * self.running_var[ci] + self.momentum * var[ci];
        }

        let inv_std = var.mapv(|v| one / (v + self.eps).sqrt());
        let mut xhat = x.clone();
        let xh = xhat.as_slice_mut().unwrap();
        for ni in 0..n {
            for ci in 0..c {
                let (m, is) = (mean[ci], inv_std[ci]);
                for v in &mut xh[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                    *v = (*v - m) * is;
                }
            }
        }
        let mut y = xhat.clone();
        let ys = y.as_slice_mut().unwrap();
        for ni in 0..n {
            for ci in 0..c {
                let (g, b) = (self.gamma[ci], self.beta[ci]);
                for v in &mut ys[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                    *v = g * *v + b;
                }
            }
        }
        (
            y,
            BnCache {
                xhat: Some(xhat),
                inv_std,
                train_mode: true,
            },
        )
    }

    /// Inference forward using the frozen running statistics.
    pub fn forward_eval(&self, x: &Array4<T>) -> Array4<T> {
        let (n, c, h, w) = x.dim();
        let one = T::one();
        let hw = h * w;
        let mut y = x.clone();
        let ys = y.as_slice_mut().unwrap();
        for ci in 0..c {
            let is = one / (self.running_var[ci] + self.eps).sqrt();
            let scale = self.gamma[ci] * is;
            let shift = self.beta[ci] - self.running_mean[ci] * scale;
            for ni in 0..n {
                for v in &mut ys[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                    *v = scale * *v + shift;
                }
            }
        }
        y
    }

    /// Eval forward that also returns a cache so gradients can flow through
    /// the frozen affine map (used while rewriting the generator).
    pub fn forward_eval_cached(&self, x: &Array4<T>) -> (Array4<T>, BnCache<T>) {
        let y = self.forward_eval(x);
        let one = T::one();
        let inv_std = self
            .running_var
            .mapv(|v| one / (v + self.eps).sqrt());
        (
            y,
            BnCache {
                xhat: None,
                inv_std,
                train_mode: false,
            },
        )
    }

    pub fn backward(
        &self,
        cache: &BnCache<T>,
        gout: &Array4<T>,
        param_grads: bool,
    ) -> (Array4<T>, Option<BnGrad<T>>) {
        let (n, c, h, w) = gout.dim();
        let hw = h * w;
        let gs = gout.as_slice().unwrap();

        if !cache.train_mode {
            // Frozen statistics: pure per-channel affine scaling.
            let mut dx = gout.clone();
            let ds = dx.as_slice_mut().unwrap();
            for ci in 0..c {
                let scale = self.gamma[ci] * cache.inv_std[ci];
                for ni in 0..n {
                    for v in &mut ds[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                        *v *= scale;
                    }
                }
            }
            return (dx, None);
        }

        let xhat = cache.xhat.as_ref().expect("training cache");
        let xh = xhat.as_slice().unwrap();
        let count = T::of_usize(n * hw);

        let mut dgamma = Array1::<T>::zeros(c);
        let mut dbeta = Array1::<T>::zeros(c);
        for ci in 0..c {
            let mut dg = T::zero();
            let mut db = T::zero();
            for ni in 0..n {
                let base = (ni * c + ci) * hw;
                for i in 0..hw {
                    dg += gs[base + i] * xh[base + i];
                    db += gs[base + i];
                }
            }
            dgamma[ci] = dg;
            dbeta[ci] = db;
        }

        let mut dx = Array4::<T>::zeros((n, c, h, w));
        let ds = dx.as_slice_mut().unwrap();
        for ci in 0..c {
            let scale = self.gamma[ci] * cache.inv_std[ci];
            let mean_dy = dbeta[ci] / count;
            let mean_dy_xhat = dgamma[ci] / count;
            for ni in 0..n {
                let base = (ni * c + ci) * hw;
                for i in 0..hw {
                    ds[base + i] =
                        scale * (gs[base + i] - mean_dy - xh[base + i] * mean_dy_xhat);
                }
            }
        }

        let grads = param_grads.then(|| BnGrad {
            gamma: dgamma,
            beta: dbeta,
        });
        (dx, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    #[test]
    fn train_forward_normalizes_per_channel() {
        let x = Array4::from_shape_fn((4, 2, 3, 3), |(a, b, c, d)| {
            (a * 9 + b * 100 + c * 3 + d) as f64 * 0.37
        });
        let mut bn = BatchNorm2d::<f64>::new(2);
        let (y, _) = bn.forward_train(&x);
        for ci in 0..2 {
            let ch = y.slice(ndarray::s![.., ci, .., ..]);
            let m: f64 = ch.iter().sum::<f64>() / ch.len() as f64;
            let v: f64 = ch.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / ch.len() as f64;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn eval_backward_is_affine_scale() {
        let mut bn = BatchNorm2d::<f64>::new(1);
        bn.gamma[0] = 2.0;
        bn.running_var[0] = 3.0;
        let x = Array4::from_elem((1, 1, 2, 2), 1.0);
        let (_, cache) = bn.forward_eval_cached(&x);
        let g = Array4::from_elem((1, 1, 2, 2), 1.0);
        let (dx, grads) = bn.backward(&cache, &g, true);
        assert!(grads.is_none());
        let expected = 2.0 / (3.0f64 + 1e-5).sqrt();
        assert!((dx[[0, 0, 0, 0]] - expected).abs() < 1e-12);
    }
}
