//! Minimal CNN toolkit: conv / transposed conv / batch norm / linear layers
//! with explicit forward caches and analytic backward passes, an Adam
//! optimizer, and sequential stacks. Deterministic by construction —
//! parallel sections never reorder floating-point accumulation.

pub mod adam;
pub mod conv;
pub mod init;
pub mod linear;
pub mod loss;
pub mod matmul;
pub mod norm;
pub mod seq;

pub use adam::Adam;
pub use conv::{Conv2d, ConvGrad, ConvTranspose2d};
pub use linear::{Linear, LinearGrad};
pub use norm::BatchNorm2d;
pub use seq::{Mode, Op, OpCache, OpGrad, Seq};

use ndarray::{Array2, Array4};

use crate::num::Real;

/// Global average pool `(N,C,H,W) -> (N,C)`.
pub fn global_avg_pool<T: Real>(x: &Array4<T>) -> Array2<T> {
    let (n, c, h, w) = x.dim();
    let scale = T::one() / T::of_usize(h * w);
    let xs = x.as_slice().unwrap();
    let mut out = Array2::<T>::zeros((n, c));
    for ni in 0..n {
        for ci in 0..c {
            let mut acc = T::zero();
            for &v in &xs[(ni * c + ci) * h * w..(ni * c + ci + 1) * h * w] {
                acc += v;
            }
            out[[ni, ci]] = acc * scale;
        }
    }
    out
}

/// Backward of [`global_avg_pool`].
pub fn global_avg_pool_backward<T: Real>(
    gout: &Array2<T>,
    h: usize,
    w: usize,
) -> Array4<T> {
    let (n, c) = gout.dim();
    let scale = T::one() / T::of_usize(h * w);
    Array4::from_shape_fn((n, c, h, w), |(ni, ci, _, _)| gout[[ni, ci]] * scale)
}

/// Concatenates two NCHW tensors along the channel axis.
pub fn concat_channels<T: Real>(a: &Array4<T>, b: &Array4<T>) -> Array4<T> {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("matching dims")
}

/// Splits a channel-axis gradient back into the two concatenated parts.
pub fn split_channels<T: Real>(g: &Array4<T>, first: usize) -> (Array4<T>, Array4<T>) {
    let a = g.slice(ndarray::s![.., ..first, .., ..]).to_owned();
    let b = g.slice(ndarray::s![.., first.., .., ..]).to_owned();
    (a, b)
}
