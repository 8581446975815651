//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Real`] so the same
//! code runs in `f32` for production training and in `f64` for the
//! finite-difference gradient checks, where single precision would eat
//! most of the tolerance budget.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
    fn of_f32(x: f32) -> Self;
    fn f32(self) -> f32;

    fn of_usize(x: usize) -> Self {
        Self::of(x as f64)
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn of_f32(x: f32) -> Self {
        x
    }
    #[inline]
    fn f32(self) -> f32 {
        self
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
    #[inline]
    fn of_f32(x: f32) -> Self {
        x as f64
    }
    #[inline]
    fn f32(self) -> f32 {
        self as f32
    }
}

/// Sorts a slice of (value, index) pairs ascending by value, breaking value
/// ties by ascending index. NaNs sort last so a poisoned distance can never
/// displace a finite one.
pub fn sort_by_value_then_index<T: Real>(pairs: &mut [(T, usize)]) {
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or_else(|| a.0.is_nan().cmp(&b.0.is_nan()))
            .then(a.1.cmp(&b.1))
    });
}
