//! Approximate Newton methods for finite-sum strongly convex objectives:
//! sketched, subsampled, regularized and NewSamp Hessians, inexact inner
//! solves, and convergence-rate diagnostics in the `M*`-norm.

pub mod error;
pub mod hessian_approx;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod rng;
pub mod sketch;
pub mod solvers;

pub use error::{Error, Result};
