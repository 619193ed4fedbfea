use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::driver::{approximate_newton_run, IterationTrace};
use super::inner::InnerSolver;
use super::{HessianMethod, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;
use crate::problems::FiniteSumObjective;

/// Reference methods the approximate Newton variants are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Baseline {
    /// Constant step; `None` means `1/λ_max(∇²F(x₀))`.
    GradientDescent { step: Option<f64> },
    FullNewton,
    /// Exact Hessian, CG inner solve (`ε₀ = 0`).
    NewtonCg { eps1: f64 },
}

impl Baseline {
    pub fn label(&self) -> &'static str {
        match self {
            Baseline::GradientDescent { .. } => "gradient-descent",
            Baseline::FullNewton => "newton",
            Baseline::NewtonCg { .. } => "newton-cg",
        }
    }

    /// The equivalent driver configuration.
    pub fn config(&self, obj: &dyn FiniteSumObjective, x0: &DVector<f64>, max_iters: usize, grad_tol: f64) -> Result<SolverConfig> {
        let (hessian, inner) = match *self {
            Baseline::GradientDescent { step } => {
                let step = match step {
                    Some(s) => s,
                    None => {
                        let lmax = sym_eigenvalues(&obj.hessian(x0)).last().copied().unwrap_or(0.0);
                        if !(lmax > 0.0) {
                            return Err(Error::NotPositiveDefinite);
                        }
                        1.0 / lmax
                    }
                };
                if !(step > 0.0) {
                    return Err(Error::domain(format!("step must be positive, got {step}")));
                }
                (HessianMethod::ScaledIdentity { scale: 1.0 / step }, InnerSolver::Exact)
            }
            Baseline::FullNewton => (HessianMethod::Exact, InnerSolver::Exact),
            Baseline::NewtonCg { eps1 } => (HessianMethod::Exact, InnerSolver::Cg { eps1 }),
        };
        Ok(SolverConfig {
            hessian,
            inner,
            max_iters,
            grad_tol,
            ..SolverConfig::default()
        })
    }
}

pub fn baseline_run(
    obj: &dyn FiniteSumObjective,
    kind: Baseline,
    x0: &DVector<f64>,
    max_iters: usize,
    grad_tol: f64,
) -> Result<IterationTrace> {
    let cfg = kind.config(obj, x0, max_iters, grad_tol)?;
    approximate_newton_run(obj, &cfg, x0)
}
