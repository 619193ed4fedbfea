//! Inner solvers for `H p = g` under the relative-residual target
//! `‖g − H p‖ ≤ (ε₁/κ) ‖g‖`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky;

/// Lowest relative residual CG is asked to reach; also used when `ε₁ = 0`.
pub const CG_TOLERANCE_FLOOR: f64 = 4.0 * f64::EPSILON;

/// CG iteration cap as a multiple of the dimension.
pub const CG_CAP_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum InnerSolver {
    /// Cholesky solve.
    Exact,
    /// Conjugate gradient to relative residual `eps1/κ`.
    Cg { eps1: f64 },
}

impl InnerSolver {
    pub fn eps1(&self) -> f64 {
        match self {
            InnerSolver::Exact => 0.0,
            InnerSolver::Cg { eps1 } => *eps1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eps1 = self.eps1();
        if !(0.0..1.0).contains(&eps1) {
            return Err(Error::domain(format!("eps1 must lie in [0, 1), got {eps1}")));
        }
        Ok(())
    }
}

/// Result of an inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub p: DVector<f64>,
    /// `‖g − H p‖ / ‖g‖` (0 when `g = 0`).
    pub relative_residual: f64,
    /// CG iterations, or 0 for the direct solve.
    pub iterations: usize,
    /// CG hit its iteration cap before reaching the target.
    pub stalled: bool,
}

fn relative_residual(h: &DMatrix<f64>, g: &DVector<f64>, p: &DVector<f64>, gnorm: f64) -> f64 {
    if gnorm == 0.0 {
        0.0
    } else {
        (g - h * p).norm() / gnorm
    }
}

/// Solves `H p = g` with the chosen method. `kappa` scales the CG target.
pub fn solve_inner(h: &DMatrix<f64>, g: &DVector<f64>, solver: InnerSolver, kappa: f64) -> Result<InnerOutcome> {
    if h.nrows() != h.ncols() || h.nrows() != g.len() {
        return Err(Error::shape(format!("system {}x{} with rhs of length {}", h.nrows(), h.ncols(), g.len())));
    }
    if !(kappa >= 1.0) {
        return Err(Error::domain(format!("kappa must be at least 1, got {kappa}")));
    }
    solver.validate()?;
    match solver {
        InnerSolver::Exact => solve_exact(h, g),
        InnerSolver::Cg { eps1 } => conjugate_gradient(h, g, (eps1 / kappa).max(CG_TOLERANCE_FLOOR), CG_CAP_FACTOR * h.nrows()),
    }
}

/// Cholesky solve followed by one step of iterative refinement.
pub fn solve_exact(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<InnerOutcome> {
    let gnorm = g.norm();
    if gnorm == 0.0 {
        cholesky(h)?;
        return Ok(InnerOutcome {
            p: DVector::zeros(g.len()),
            relative_residual: 0.0,
            iterations: 0,
            stalled: false,
        });
    }
    let chol = cholesky(h)?;
    let mut p = chol.solve(g);
    let r = g - h * &p;
    p += chol.solve(&r);
    Ok(InnerOutcome {
        relative_residual: relative_residual(h, g, &p, gnorm),
        p,
        iterations: 0,
        stalled: false,
    })
}

/// Conjugate gradient from `p = 0` until `‖g − Hp‖ ≤ tol·‖g‖` or `max_iters`.
///
/// On a stall the iterate with the smallest true residual is returned.
/// A non-positive curvature direction means `H` is not SPD.
pub fn conjugate_gradient(h: &DMatrix<f64>, g: &DVector<f64>, tol: f64, max_iters: usize) -> Result<InnerOutcome> {
    let gnorm = g.norm();
    let mut p = DVector::zeros(g.len());
    if gnorm == 0.0 {
        return Ok(InnerOutcome {
            p,
            relative_residual: 0.0,
            iterations: 0,
            stalled: false,
        });
    }
    let target = tol * gnorm;
    let mut r = g.clone();
    let mut dir = r.clone();
    let mut rr = r.norm_squared();
    let mut best = (p.clone(), 1.0);
    let mut iterations = 0;
    while iterations < max_iters {
        let hd = h * &dir;
        let curvature = dir.dot(&hd);
        if !(curvature > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let step = rr / curvature;
        p.axpy(step, &dir, 1.0);
        r.axpy(-step, &hd, 1.0);
        iterations += 1;
        let rr_next = r.norm_squared();
        if rr_next.sqrt() <= target {
            // Recursive residuals drift; confirm against the true one.
            let true_rel = relative_residual(h, g, &p, gnorm);
            if true_rel <= tol {
                return Ok(InnerOutcome {
                    p,
                    relative_residual: true_rel,
                    iterations,
                    stalled: false,
                });
            }
            if true_rel < best.1 {
                best = (p.clone(), true_rel);
            }
            r = g - h * &p;
            dir = r.clone();
            rr = r.norm_squared();
            continue;
        }
        let rel = rr_next.sqrt() / gnorm;
        if rel < best.1 {
            best = (p.clone(), rel);
        }
        dir = &r + &dir * (rr_next / rr);
        rr = rr_next;
    }
    let (p, _) = best;
    let achieved = relative_residual(h, g, &p, gnorm);
    Ok(InnerOutcome {
        relative_residual: achieved,
        stalled: achieved > tol,
        p,
        iterations,
    })
}
