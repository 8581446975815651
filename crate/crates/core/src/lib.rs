//! rignovel-core: automated novelty-seeking design synthesis at desk scale.
//!
//! The pipeline trains a small convolutional GAN on a procedurally generated
//! part-labeled design dataset, scores generated designs against a feature
//! gallery with a KNN novelty measure, localizes the novelty per pixel,
//! attributes it to a semantic part, then rewrites one generator layer with
//! a rank-constrained weight update so the novel part generalizes across the
//! latent space. Evaluation compares mean KNN novelty and SSIM distance
//! before and after the edit.
//!
//! All numeric code is generic over the scalar ([`Real`]); production paths
//! run in `f32`, gradient checks run in `f64`. The aliases below pin the
//! production scalar.

pub mod io_util;
pub mod synthdata;
pub mod nn;
pub mod num;
pub mod rng;

pub use num::Real;

/// Production scalar type.
pub type Scalar = f32;

/// Grayscale raster with values in `[0,1]`, indexed `(row, col)`.
pub type Image<T> = ndarray::Array2<T>;
/// Binary raster, same indexing as [`Image`].
pub type BitMask = ndarray::Array2<bool>;
/// Per-pixel part labels, `0` = background.
pub type LabelMap = ndarray::Array2<u8>;

pub type ImageF = Image<Scalar>;
