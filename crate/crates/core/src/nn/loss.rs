//! Loss functions with analytic gradients.

use ndarray::{Array1, Array2, Array3, Array4};

use crate::num::Real;

/// Numerically stable binary cross-entropy on logits; returns the mean loss
/// and the gradient with respect to the logits.
pub fn bce_with_logits<T: Real>(logits: &Array1<T>, targets: &Array1<T>) -> (T, Array1<T>) {
    assert_eq!(logits.len(), targets.len());
    let n = T::of_usize(logits.len());
    let one = T::one();
    let mut loss = T::zero();
    let mut grad = Array1::<T>::zeros(logits.len());
    for i in 0..logits.len() {
        let z = logits[i];
        let t = targets[i];
        loss += z.max(T::zero()) - z * t + (one + (-z.abs()).exp()).ln();
        let sig = one / (one + (-z).exp());
        grad[i] = (sig - t) / n;
    }
    (loss / n, grad)
}

/// Softmax cross-entropy over class rows; labels index the true class.
pub fn softmax_ce_rows<T: Real>(logits: &Array2<T>, labels: &[usize]) -> (T, Array2<T>) {
    let (n, c) = logits.dim();
    assert_eq!(labels.len(), n);
    let nn = T::of_usize(n);
    let mut loss = T::zero();
    let mut grad = Array2::<T>::zeros((n, c));
    for i in 0..n {
        let row = logits.row(i);
        let mx = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for &z in row.iter() {
            denom += (z - mx).exp();
        }
        let log_denom = denom.ln() + mx;
        loss += log_denom - row[labels[i]];
        for j in 0..c {
            let p = (row[j] - log_denom).exp();
            grad[[i, j]] = (p - if j == labels[i] { T::one() } else { T::zero() }) / nn;
        }
    }
    (loss / nn, grad)
}

/// Per-pixel weighted softmax cross-entropy for segmentation.
///
/// `weights[c]` scales pixels whose true label is `c`; the loss is
/// normalized by the total weight so rebalancing does not change its scale.
pub fn softmax_ce_pixels<T: Real>(
    logits: &Array4<T>,
    labels: &Array3<u8>,
    weights: &[T],
) -> (T, Array4<T>) {
    let (n, c, h, w) = logits.dim();
    assert_eq!(labels.dim(), (n, h, w));
    assert_eq!(weights.len(), c);
    let ls = logits.as_slice().expect("contiguous logits");
    let hw = h * w;

    let mut grad = Array4::<T>::zeros((n, c, h, w));
    let gs = grad.as_slice_mut().unwrap();
    let mut loss = T::zero();
    let mut total_weight = T::zero();
    let mut probs = vec![T::zero(); c];

    for ni in 0..n {
        for pi in 0..hw {
            let label = labels.as_slice().unwrap()[ni * hw + pi] as usize;
            let wgt = weights[label];
            total_weight += wgt;
            let mut mx = T::neg_infinity();
            for ci in 0..c {
                mx = mx.max(ls[(ni * c + ci) * hw + pi]);
            }
            let mut denom = T::zero();
            for ci in 0..c {
                let e = (ls[(ni * c + ci) * hw + pi] - mx).exp();
                probs[ci] = e;
                denom += e;
            }
            let log_denom = denom.ln() + mx;
            loss += wgt * (log_denom - ls[(ni * c + label) * hw + pi]);
            for ci in 0..c {
                let p = probs[ci] / denom;
                let onehot = if ci == label { T::one() } else { T::zero() };
                gs[(ni * c + ci) * hw + pi] = wgt * (p - onehot);
            }
        }
    }

    let z = if total_weight > T::zero() {
        total_weight
    } else {
        T::one()
    };
    for g in gs.iter_mut() {
        *g /= z;
    }
    (loss / z, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fd_check<F: FnMut(&Array1<f64>) -> f64>(
        mut f: F,
        x: &Array1<f64>,
        analytic: &Array1<f64>,
    ) {
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!(
                (fd - analytic[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "i={i} fd={fd} analytic={}",
                analytic[i]
            );
        }
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let z = array![0.3, -1.7, 2.5];
        let t = array![1.0, 0.0, 1.0];
        let (_, g) = bce_with_logits(&z, &t);
        fd_check(|zz| bce_with_logits(zz, &t).0, &z, &g);
    }

    #[test]
    fn softmax_rows_gradient_matches_finite_differences() {
        let logits = array![[0.2, -0.4, 1.1], [2.0, 0.0, -1.0]];
        let labels = vec![2usize, 0];
        let (_, g) = softmax_ce_rows(&logits, &labels);
        for i in 0..2 {
            let row = logits.row(i).to_owned();
            let grow = g.row(i).to_owned();
            fd_check(
                |r| {
                    let mut l = logits.clone();
                    l.row_mut(i).assign(r);
                    softmax_ce_rows(&l, &labels).0
                },
                &row,
                &grow,
            );
        }
    }

    #[test]
    fn pixel_ce_prefers_true_label() {
        let mut logits = Array4::<f64>::zeros((1, 3, 2, 2));
        logits[[0, 1, 0, 0]] = 5.0;
        let mut labels = Array3::<u8>::zeros((1, 2, 2));
        labels[[0, 0, 0]] = 1;
        let w = [1.0, 1.0, 1.0];
        let (loss_correct, _) = softmax_ce_pixels(&logits, &labels, &w);
        labels[[0, 0, 0]] = 2;
        let (loss_wrong, _) = softmax_ce_pixels(&logits, &labels, &w);
        assert!(loss_correct < loss_wrong);
    }
}
