//! Pathwise entropy solutions of scalar conservation laws
//! `du + sum_i A_i(u)_x dW^i = 0` driven by continuous, possibly rough, paths.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bump;
pub mod characteristics;
pub mod error;
pub mod exec;
pub mod flux;
pub mod fv;
pub mod harness;
pub mod kinetic;
pub mod quad;
pub mod rough_path;
pub mod semilinear;

pub use error::{Error, Result};
