use nalgebra::{DMatrix, DVector};

use super::{CurvatureBounds, Dataset, FiniteSumObjective};
use crate::error::{Error, Result};
use crate::linalg::power_iteration;

/// Primal linear SVM with squared hinge loss:
///
/// `F(x) = ½‖x‖² + (C/2n) Σ_i max(0, 1 − b_i⟨x, a_i⟩)²`.
///
/// The Hessian `I + (C/n) Σ_{i∈SV(x)} a_i a_iᵀ` depends on `x` only through
/// the support-vector set `SV(x) = {i : b_i⟨x, a_i⟩ < 1}`, so it is
/// piecewise constant and not Lipschitz continuous.
#[derive(Debug, Clone)]
pub struct HingeSquaredSvm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    name: String,
    bounds: CurvatureBounds,
}

impl HingeSquaredSvm {
    pub fn new(data: &Dataset, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain(format!("C must be positive, got {c}")));
        }
        data.check_binary_labels()?;
        let a = data.features.clone();
        let n = a.nrows() as f64;
        let max_row_sq = a.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        let gram = a.tr_mul(&a);
        // Power iteration may undershoot slightly; pad so L stays an upper bound.
        let top = power_iteration(&gram, 10_000, 1e-13) * (1.0 + 1e-8);
        let bounds = CurvatureBounds {
            sample_hessian_bound: 1.0 + c * max_row_sq,
            strong_convexity: 1.0,
            smoothness: 1.0 + c * top / n,
        };
        Ok(HingeSquaredSvm {
            a,
            b: data.labels.clone(),
            c,
            name: format!("svm_hinge2[{}]", data.name),
            bounds,
        })
    }

    pub fn penalty(&self) -> f64 {
        self.c
    }

    /// `b_i⟨x, a_i⟩` for every sample.
    pub fn margins(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.a * x).component_mul(&self.b)
    }

    /// `SV(x)`.
    pub fn support_vectors(&self, x: &DVector<f64>) -> Vec<usize> {
        self.margins(x)
            .iter()
            .enumerate()
            .filter(|(_, &m)| m < 1.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Smallest `|1 − margin|`: distance to the nearest kink of the loss.
    pub fn kink_distance(&self, x: &DVector<f64>) -> f64 {
        self.margins(x).iter().map(|m| (1.0 - m).abs()).fold(f64::INFINITY, f64::min)
    }
}

impl FiniteSumObjective for HingeSquaredSvm {
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
        let loss: f64 = self.margins(x).iter().map(|m| (1.0 - m).max(0.0).powi(2)).sum();
        0.5 * x.norm_squared() + self.c / (2.0 * self.a.nrows() as f64) * loss
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.a.nrows() as f64;
        let slack = self.margins(x).map(|m| (1.0 - m).max(0.0)).component_mul(&self.b);
        x - self.a.tr_mul(&slack) * (self.c / n)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.a.nrows() as f64;
        let sv = self.support_vectors(x);
        let rows = self.a.select_rows(sv.iter());
        DMatrix::identity(self.dim(), self.dim()) + rows.tr_mul(&rows) * (self.c / n)
    }

    fn ridge(&self) -> f64 {
        1.0
    }

    fn sample_gradient(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let row = self.a.row(i);
        let margin = self.b[i] * (row * x)[0];
        let slack = (1.0 - margin).max(0.0);
        row.transpose() * (-self.c * slack * self.b[i])
    }

    fn sample_hessian(&self, i: usize, x: &DVector<f64>) -> DMatrix<f64> {
        let row = self.a.row(i);
        let margin = self.b[i] * (row * x)[0];
        if margin < 1.0 {
            row.tr_mul(&row) * self.c
        } else {
            DMatrix::zeros(self.dim(), self.dim())
        }
    }

    fn sample_hessian_sum(&self, indices: &[usize], x: &DVector<f64>) -> DMatrix<f64> {
        let margins = self.margins(x);
        let active: Vec<usize> = indices.iter().copied().filter(|&i| margins[i] < 1.0).collect();
        let rows = self.a.select_rows(active.iter());
        rows.tr_mul(&rows) * self.c
    }

    fn curvature_pool(&self, x: &DVector<f64>) -> Vec<usize> {
        self.support_vectors(x)
    }

    fn hessian_factor(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let d = self.dim();
        let sv = self.support_vectors(x);
        let scale = (self.c / self.a.nrows() as f64).sqrt();
        let mut factor = DMatrix::zeros(d + sv.len(), d);
        factor.view_mut((0, 0), (d, d)).fill_with_identity();
        for (k, &i) in sv.iter().enumerate() {
            factor.row_mut(d + k).copy_from(&(self.a.row(i) * scale));
        }
        Some(factor)
    }

    fn bounds(&self) -> CurvatureBounds {
        self.bounds
    }
}
