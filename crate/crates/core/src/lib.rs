//! Rotated and Tucker-decomposed codebooks for limited-feedback 3D MIMO.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the common double-precision types.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod correlation;
pub mod error;
pub mod flatfile;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod simulator;
pub mod tucker;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::Real;

pub type CMatrix64 = linalg::CMatrix<f64>;
pub type CMatrix32 = linalg::CMatrix<f32>;
pub type Hermitian64 = linalg::Hermitian<f64>;
pub type C64 = Complex<f64>;
