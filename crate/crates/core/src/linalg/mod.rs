//! Dense linear algebra: matrices, SVD, low-rank truncation and weight flattening.

mod matrix;
mod svd;
mod tensor;

pub use matrix::{frobenius_sq, Matrix};
pub use svd::{svd, truncate, SvdFactorization};
pub use tensor::{flatten_to_2d, unflatten, WeightTensor};
