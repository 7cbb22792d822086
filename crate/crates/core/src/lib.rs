//! Piecewise linear strain (PLS) Cosserat rods: kinematics on SE(3), generalized
//! dynamics, strain-mode reduction, cable actuation, static equilibria and
//! material identification.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod dynamics;
pub mod error;
pub mod identification;
pub mod kinematics;
pub mod pcs;
pub mod quadrature;
pub mod reduction;
pub mod rod;
pub mod se3;
pub mod statics;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
