//! Matrix multiply with deterministic column-split parallelism.
//!
//! `matrixmultiply` (behind `ndarray::dot`) is single-threaded; convolution
//! gemms here have few rows and very many columns, so splitting the
//! right-hand side by column blocks keeps both cores busy. Every output
//! element is accumulated in the same order regardless of the split, so the
//! result is reproducible run to run.

use ndarray::parallel::prelude::*;
use ndarray::{Array2, ArrayView2, Axis};

use crate::num::Real;

/// Column count below which the split overhead is not worth it.
const SPLIT_MIN_COLS: usize = 1024;
/// Fixed chunk count so results do not depend on the machine's core count.
const SPLIT_CHUNKS: usize = 4;

pub fn par_matmul<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> Array2<T> {
    let (m, n) = (a.nrows(), b.ncols());
    debug_assert_eq!(a.ncols(), b.nrows());
    if n < SPLIT_MIN_COLS {
        return a.dot(&b);
    }
    let chunk = n.div_ceil(SPLIT_CHUNKS);
    let mut out = Array2::<T>::zeros((m, n));
    out.axis_chunks_iter_mut(Axis(1), chunk)
        .into_par_iter()
        .zip(b.axis_chunks_iter(Axis(1), chunk).into_par_iter())
        .for_each(|(mut oc, bc)| {
            oc.assign(&a.dot(&bc));
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    #[test]
    fn split_matches_plain_dot() {
        let a = Array::from_shape_fn((7, 33), |(i, j)| ((i * 31 + j * 7) % 13) as f64 * 0.25 - 1.0);
        let b = Array::from_shape_fn((33, 2050), |(i, j)| ((i * 5 + j) % 11) as f64 * 0.5 - 2.0);
        let fast = par_matmul(a.view(), b.view());
        let slow = a.dot(&b);
        assert_eq!(fast, slow);
    }

    #[test]
    fn small_matrices_take_the_direct_path() {
        let a = Array::from_shape_fn((3, 4), |(i, j)| (i + j) as f32);
        let b = Array::from_shape_fn((4, 2), |(i, j)| (i * 2 + j) as f32);
        assert_eq!(par_matmul(a.view(), b.view()), a.dot(&b));
    }
}
