//! Adam optimizer over flat parameter slices.
//!
//! Callers pass `(param, grad)` slice pairs in a fixed order each step; the
//! optimizer allocates matching moment buffers on first use and indexes them
//! positionally, so the pairing order must never change between steps.

use crate::num::Real;

#[derive(Debug, Clone)]
pub struct Adam<T: Real> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr: T::of(lr),
            beta1: T::of(beta1),
            beta2: T::of(beta2),
            eps: T::of(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, pairs: &mut [(&mut [T], &[T])]) {
        if self.m.is_empty() {
            for (p, _) in pairs.iter() {
                self.m.push(vec![T::zero(); p.len()]);
                self.v.push(vec![T::zero(); p.len()]);
            }
        }
        assert_eq!(self.m.len(), pairs.len(), "parameter group count changed");
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t as i32);
        let bc2 = one - self.beta2.powi(self.t as i32);
        for (slot, (param, grad)) in pairs.iter_mut().enumerate() {
            assert_eq!(param.len(), grad.len());
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                param[i] = param[i] - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        // With bias correction the very first Adam update is ~lr * sign(g).
        let mut adam = Adam::<f64>::new(0.1, 0.9, 0.999);
        let mut p = vec![1.0, -2.0];
        let g = vec![0.5, -0.25];
        adam.step(&mut [(&mut p, &g)]);
        assert!((p[0] - (1.0 - 0.1)).abs() < 1e-6);
        assert!((p[1] - (-2.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut adam = Adam::<f64>::new(0.05, 0.9, 0.999);
        let mut p = vec![3.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 1.25)];
            adam.step(&mut [(&mut p, &g)]);
        }
        assert!((p[0] - 1.25).abs() < 1e-3);
    }
}
