//! Sup/inf-convolution regularization of periodic grid functions and
//! empirical verification of vanishing-viscosity rate bounds for
//! Hamilton-Jacobi equations.

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod envelope;
pub mod error;
mod exact;
pub mod grid;
pub mod harness;
pub mod operators;
pub mod solver;

pub use envelope::{inf_convolution, sup_convolution, EnvelopeKind, EnvelopeResult};
pub use error::{Error, Result};
pub use grid::{holder_seminorm, sup_norm_diff, Grid, GridFn, HolderClass, Point};
