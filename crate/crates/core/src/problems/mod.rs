//! Finite-sum objectives `F(x) = (1/n) Σ f_i(x)` and the data they are built from.

mod check;
mod least_squares;
mod libsvm;
mod svm;
mod synthetic;

pub use check::{check_derivatives, DerivativeErrors};
pub use least_squares::LeastSquares;
pub use libsvm::{load_libsvm, load_libsvm_with, parse_libsvm, write_libsvm, LabelPolicy};
pub use svm::HingeSquaredSvm;
pub use synthetic::{synthetic_spectrum_matrix, synthetic_two_class, synthetic_with_spectrum, SyntheticLeastSquares};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Samples as rows of `features`, one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: DVector<f64>,
    pub name: String,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, name: impl Into<String>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::shape(format!(
                "dataset must be at least 1x1, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if labels.len() != features.nrows() {
            return Err(Error::shape(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains NaN or infinite entries"));
        }
        Ok(Dataset {
            features,
            labels,
            name: name.into(),
        })
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rejects any label outside `{-1, +1}`.
    pub fn check_binary_labels(&self) -> Result<()> {
        match self.labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            Some(&bad) => Err(Error::LabelDomain(bad)),
            None => Ok(()),
        }
    }
}

/// Curvature constants of an objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureBounds {
    /// `K ≥ max_i ‖∇²f_i(x)‖` for every `x`.
    pub sample_hessian_bound: f64,
    /// `σ ≤ λ_min(∇²F(x))` for every `x`; also the strong-convexity modulus μ.
    pub strong_convexity: f64,
    /// `L ≥ λ_max(∇²F(x))` for every `x`.
    pub smoothness: f64,
}

impl CurvatureBounds {
    /// `κ = L/μ`.
    pub fn condition_number(&self) -> f64 {
        self.smoothness / self.strong_convexity
    }
}

/// An objective of the form `F(x) = ρ/2 ‖x‖² + (1/n) Σ_i ℓ_i(x)`.
///
/// The ridge term `ρ/2 ‖x‖²` (zero for least squares) is split out so that
/// subsampling only touches the data terms. Per-sample quantities refer to
/// `ℓ_i`, scaled so that their plain average over `i` gives the data part of
/// `F`, its gradient and its Hessian:
///
/// `∇²F(x) = ρ I + (1/n) Σ_i sample_hessian(i, x)`.
///
/// Implementations are immutable and safe to evaluate from many threads.
pub trait FiniteSumObjective: Send + Sync {
    fn name(&self) -> &str;
    fn num_samples(&self) -> usize;
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Coefficient `ρ` of the split-out ridge term.
    fn ridge(&self) -> f64 {
        0.0
    }

    fn sample_gradient(&self, i: usize, x: &DVector<f64>) -> DVector<f64>;
    fn sample_hessian(&self, i: usize, x: &DVector<f64>) -> DMatrix<f64>;

    /// `Σ_{j ∈ indices} sample_hessian(j, x)`, repeats counted.
    fn sample_hessian_sum(&self, indices: &[usize], x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        indices
            .iter()
            .fold(DMatrix::zeros(d, d), |acc, &j| acc + self.sample_hessian(j, x))
    }

    /// Indices whose sample Hessian may be nonzero at `x`. Hessian
    /// subsampling draws from this pool.
    fn curvature_pool(&self, x: &DVector<f64>) -> Vec<usize> {
        let _ = x;
        (0..self.num_samples()).collect()
    }

    /// `B(x)` with `B(x)ᵀ B(x) = ∇²F(x)`, when available.
    fn hessian_factor(&self, x: &DVector<f64>) -> Option<DMatrix<f64>>;

    /// True when `hessian_factor` does not depend on `x`.
    fn factor_is_constant(&self) -> bool {
        false
    }

    fn bounds(&self) -> CurvatureBounds;
}
