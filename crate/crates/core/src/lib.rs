//! Weak Galerkin discretization of the Stokes eigenvalue problem on
//! triangulated polygonal domains in two dimensions.

// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod glb;
pub mod mesh;
pub mod quadrature;
pub mod source;
pub mod sparse;
pub mod wg;

pub use error::{Error, Result};
