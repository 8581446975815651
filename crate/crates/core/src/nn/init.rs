//! Weight initialization.

use ndarray::{Array1, Array2, Array4};
use rand::Rng;

use crate::num::Real;
use crate::rng::next_standard_normal;

/// DCGAN-style init: N(0, 0.02) for conv weights.
pub fn normal_4d<T: Real, R: Rng>(rng: &mut R, shape: (usize, usize, usize, usize), std: f64) -> Array4<T> {
    let n = shape.0 * shape.1 * shape.2 * shape.3;
    let data: Vec<T> = (0..n)
        .map(|_| next_standard_normal::<T, _>(rng) * T::of(std))
        .collect();
    Array4::from_shape_vec(shape, data).unwrap()
}

/// He init for ReLU stacks: N(0, sqrt(2 / fan_in)).
pub fn he_4d<T: Real, R: Rng>(rng: &mut R, shape: (usize, usize, usize, usize)) -> Array4<T> {
    let fan_in = shape.1 * shape.2 * shape.3;
    normal_4d(rng, shape, (2.0 / fan_in as f64).sqrt())
}

pub fn he_2d<T: Real, R: Rng>(rng: &mut R, shape: (usize, usize)) -> Array2<T> {
    let std = (2.0 / shape.1 as f64).sqrt();
    let data: Vec<T> = (0..shape.0 * shape.1)
        .map(|_| next_standard_normal::<T, _>(rng) * T::of(std))
        .collect();
    Array2::from_shape_vec(shape, data).unwrap()
}

pub fn zeros_1d<T: Real>(n: usize) -> Array1<T> {
    Array1::zeros(n)
}
