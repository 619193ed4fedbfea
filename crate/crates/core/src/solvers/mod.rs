//! The approximate Newton driver `x ← x − p`, `H p ≈ ∇F(x)`, with pluggable
//! Hessian builders and inner solvers, plus the baselines it is compared to.

mod baselines;
mod driver;
mod inner;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::SketchKind;

pub use baselines::{baseline_run, Baseline};
pub use driver::{
    approximate_newton_run, approximate_newton_run_with, build_hessian, FactorCache, IterationRecord, IterationTrace, RunStatus, StepInfo,
};
pub use inner::{conjugate_gradient, solve_exact, solve_inner, InnerOutcome, InnerSolver, CG_CAP_FACTOR, CG_TOLERANCE_FLOOR};

/// Largest `ε₀` the log-decay schedule returns.
pub const SCHEDULE_CAP: f64 = 0.9;

/// `1/ln(1+t)` clamped to `(0, 0.9]`.
pub fn superlinear_schedule(t: usize) -> f64 {
    superlinear_schedule_at(t as f64)
}

/// Real-argument form of [`superlinear_schedule`].
pub fn superlinear_schedule_at(t: f64) -> f64 {
    let v = 1.0 / t.ln_1p();
    if v.is_finite() && v > 0.0 {
        v.min(SCHEDULE_CAP)
    } else {
        SCHEDULE_CAP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eps0Schedule {
    Constant(f64),
    /// [`superlinear_schedule`].
    LogDecay,
}

impl Eps0Schedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Eps0Schedule::Constant(e) => *e,
            Eps0Schedule::LogDecay => superlinear_schedule(t),
        }
    }
}

/// Number of rows of a sketch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchSize {
    Rows(usize),
    /// `⌈f·d⌉` rows.
    PerDim(f64),
    /// [`crate::sketch::calibrated_sketch_size`] at the current `ε₀`.
    Calibrated,
    /// `⌈f·d/ε₀²⌉` rows at the current `ε₀`.
    Eps0Scaled(f64),
}

impl SketchSize {
    pub fn rows(&self, kind: SketchKind, d: usize, eps0: f64) -> usize {
        let rows = match *self {
            SketchSize::Rows(s) => s,
            SketchSize::PerDim(f) => (f * d as f64).ceil() as usize,
            SketchSize::Calibrated => crate::sketch::calibrated_sketch_size(kind, d, eps0),
            SketchSize::Eps0Scaled(f) => (f * d as f64 / (eps0 * eps0)).ceil() as usize,
        };
        rows.max(1)
    }
}

/// Number of sampled per-sample Hessians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    Fixed(usize),
    /// `⌈f·|pool|⌉` draws (at least one) from the current curvature pool.
    PoolFraction(f64),
    /// Every pool index once.
    Full,
    /// The uniform-sampling size for `(K, σ, d, δ, ε₀)` with the objective's bounds.
    Formula { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum HessianMethod {
    Exact,
    Sketched { kind: SketchKind, size: SketchSize },
    Subsampled { size: SampleSize },
    Regularized { size: SampleSize, alpha: f64 },
    NewSamp { size: SampleSize, rank: usize },
    /// `H = scale·I`: gradient descent with step `1/scale`.
    ScaledIdentity { scale: f64 },
}

impl HessianMethod {
    pub fn label(&self) -> String {
        match self {
            HessianMethod::Exact => "newton".into(),
            HessianMethod::Sketched { kind, .. } => format!("sketch-{}", kind.label()),
            HessianMethod::Subsampled { .. } => "subsampled".into(),
            HessianMethod::Regularized { alpha, .. } => format!("regularized-a{alpha}"),
            HessianMethod::NewSamp { rank, .. } => format!("newsamp-r{rank}"),
            HessianMethod::ScaledIdentity { .. } => "gradient-descent".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Full,
    Subsampled(usize),
}

/// Source of the condition number `κ` in the inner tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    /// `L/μ` from the objective's curvature bounds.
    #[default]
    ObjectiveBounds,
    /// `λ_max(∇²F(x₀))/μ` with `λ_max` from power iteration.
    PowerIteration,
}

/// Which iterations keep `x` and `∇F(x)` snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotPolicy {
    #[default]
    Every,
    EveryK(usize),
    Off,
}

impl SnapshotPolicy {
    pub fn keeps(&self, t: usize) -> bool {
        match *self {
            SnapshotPolicy::Every => true,
            SnapshotPolicy::EveryK(k) => k > 0 && t % k == 0,
            SnapshotPolicy::Off => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub hessian: HessianMethod,
    pub gradient: GradientMode,
    pub inner: InnerSolver,
    pub eps0: Eps0Schedule,
    pub kappa: KappaSource,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub divergence_guard: f64,
    pub seed: u64,
    pub snapshots: SnapshotPolicy,
    /// Check the spectral sandwich against the exact Hessian at every step.
    pub certify: bool,
    /// Exact Newton steps taken before switching to `hessian`.
    pub warm_start_newton_steps: usize,
    /// Accept `alpha = 0` for the regularized builder (reduction tests).
    pub allow_zero_alpha: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            hessian: HessianMethod::Exact,
            gradient: GradientMode::Full,
            inner: InnerSolver::Exact,
            eps0: Eps0Schedule::Constant(0.5),
            kappa: KappaSource::ObjectiveBounds,
            max_iters: 100,
            grad_tol: 1e-8,
            divergence_guard: 1e8,
            seed: 0,
            snapshots: SnapshotPolicy::Every,
            certify: false,
            warm_start_newton_steps: 0,
            allow_zero_alpha: false,
        }
    }
}

impl SolverConfig {
    pub fn with_hessian(hessian: HessianMethod) -> Self {
        SolverConfig {
            hessian,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if !(self.grad_tol > 0.0) {
            return Err(Error::domain(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be at least 1"));
        }
        if !(self.divergence_guard > 0.0) {
            return Err(Error::domain("divergence_guard must be positive"));
        }
        if let Eps0Schedule::Constant(e) = self.eps0 {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::domain(format!("eps0 must lie in (0, 1), got {e}")));
            }
        }
        match self.hessian {
            HessianMethod::Regularized { alpha, .. } if !(alpha > 0.0 || (alpha == 0.0 && self.allow_zero_alpha)) => {
                Err(Error::domain(format!("regularizer alpha must be positive, got {alpha}")))
            }
            HessianMethod::ScaledIdentity { scale } if !(scale > 0.0) => {
                Err(Error::domain(format!("identity scale must be positive, got {scale}")))
            }
            _ => Ok(()),
        }
    }
}
