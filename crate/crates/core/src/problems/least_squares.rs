use nalgebra::{DMatrix, DVector};

use super::{CurvatureBounds, Dataset, FiniteSumObjective};
use crate::error::{Error, Result};
use crate::linalg::ensure_full_column_rank;

/// `F(x) = ½‖Ax − b‖²`, written as the average of
/// `f_i(x) = (n/2)(a_iᵀx − b_i)²`.
///
/// The Hessian `AᵀA` is constant and `A` itself is the Hessian factor.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: DMatrix<f64>,
    b: DVector<f64>,
    name: String,
    bounds: CurvatureBounds,
    sigma_max: f64,
    sigma_min: f64,
}

impl LeastSquares {
    /// Fails with `RankDeficient` unless `σ_min(A) > 1e-12`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::shape(format!("A has {} rows but b has {} entries", a.nrows(), b.len())));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::shape("A must be non-empty"));
        }
        let (sigma_max, sigma_min) = ensure_full_column_rank(&a)?;
        let n = a.nrows() as f64;
        let max_row_sq = a.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        let bounds = CurvatureBounds {
            sample_hessian_bound: n * max_row_sq,
            strong_convexity: sigma_min * sigma_min,
            smoothness: sigma_max * sigma_max,
        };
        Ok(LeastSquares {
            a,
            b,
            name: "least_squares".to_string(),
            bounds,
            sigma_max,
            sigma_min,
        })
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let mut ls = Self::new(data.features.clone(), data.labels.clone())?;
        ls.name = format!("least_squares[{}]", data.name);
        Ok(ls)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    /// `σ_max(A) / σ_min(A)`.
    pub fn condition_number(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
}

impl FiniteSumObjective for LeastSquares {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_samples(&self) -> usize {
        self.a.nrows()
    }

    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(&self.residual(x))
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.tr_mul(&self.a)
    }

    fn sample_gradient(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let row = self.a.row(i);
        let r = (row * x)[0] - self.b[i];
        row.transpose() * (self.a.nrows() as f64 * r)
    }

    fn sample_hessian(&self, i: usize, _x: &DVector<f64>) -> DMatrix<f64> {
        let row = self.a.row(i);
        row.tr_mul(&row) * self.a.nrows() as f64
    }

    fn sample_hessian_sum(&self, indices: &[usize], _x: &DVector<f64>) -> DMatrix<f64> {
        let rows = self.a.select_rows(indices.iter());
        rows.tr_mul(&rows) * self.a.nrows() as f64
    }

    fn hessian_factor(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }

    fn factor_is_constant(&self) -> bool {
        true
    }

    fn bounds(&self) -> CurvatureBounds {
        self.bounds
    }
}
