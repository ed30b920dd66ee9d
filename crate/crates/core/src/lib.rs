// Input guards are written as `!(x < bound)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boettcher;
pub mod error;
pub mod family;
pub mod fatou;
pub mod perturbation;
pub mod quadrature;
pub mod transfer;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
