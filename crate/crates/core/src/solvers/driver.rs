use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::inner::{solve_inner, InnerSolver};
use super::{GradientMode, HessianMethod, KappaSource, SampleSize, SolverConfig};
use crate::error::{Error, Result};
use crate::hessian_approx::{
    check_spectral_sandwich, newsamp_from_subsampled, shift_diagonal, sketched_hessian, subsampled_gradient,
    subsampled_hessian_with, uniform_sample_size, ApproxHessian, BuildMeta, HessianKind, Sampling, SandwichReport,
};
use crate::linalg::power_iteration;
use crate::problems::FiniteSumObjective;
use crate::rng::{derive_seed, purpose};
use crate::sketch::{make_oblivious_sketch, LeverageScores, SketchKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    Diverged,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::Diverged => "diverged",
        }
    }
}

/// What happened in the step taken from an iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub hessian: HessianKind,
    pub meta: BuildMeta,
    pub eps0: f64,
    /// `‖g − H p‖ / ‖g‖` against the gradient used for the step.
    pub inner_residual: f64,
    /// The target `ε₁/κ` (0 for the direct solve).
    pub residual_target: f64,
    pub inner_iterations: usize,
    pub inner_stalled: bool,
    pub gradient_sampled: bool,
    /// Present when the run certifies each step; `None` inside a certified
    /// run means `H` was not positive definite.
    pub sandwich: Option<SandwichReport>,
}

impl StepInfo {
    /// The sandwich held at the step's `ε₀` target.
    pub fn sandwich_certified(&self) -> bool {
        self.sandwich.is_some_and(|s| s.holds)
    }

    /// The inner residual met its target.
    pub fn residual_certified(&self) -> bool {
        !self.inner_stalled && self.inner_residual <= self.residual_target.max(super::CG_TOLERANCE_FLOOR) * (1.0 + 1e-9)
    }
}

/// Row `t` describes iterate `x⁽ᵗ⁾` and, unless it is the last row, the step
/// taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// Full gradient norm at `x⁽ᵗ⁾`.
    pub grad_norm: f64,
    /// Filled in by `metrics::annotate`.
    pub grad_mstar_norm: Option<f64>,
    pub x: Option<DVector<f64>>,
    pub gradient: Option<DVector<f64>>,
    pub step: Option<StepInfo>,
    /// Milliseconds since the run started, taken when the row was recorded.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    /// `κ` used in the inner tolerance.
    pub kappa: f64,
}

impl IterationTrace {
    /// Steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.grad_norm)
    }

    pub fn final_x(&self) -> Option<&DVector<f64>> {
        self.records.last().and_then(|r| r.x.as_ref())
    }

    /// Iterates and gradients were kept for every row.
    pub fn has_all_snapshots(&self) -> bool {
        self.records.iter().all(|r| r.x.is_some() && r.gradient.is_some())
    }
}

/// Per-run cache of quantities that do not change across iterations.
#[derive(Debug, Default)]
pub struct FactorCache {
    factor: Option<DMatrix<f64>>,
    leverage: Option<LeverageScores>,
}

impl FactorCache {
    fn factor(&mut self, obj: &dyn FiniteSumObjective, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if let Some(f) = &self.factor {
            return Ok(f.clone());
        }
        let f = obj
            .hessian_factor(x)
            .ok_or_else(|| Error::domain(format!("objective {} has no Hessian factor", obj.name())))?;
        if obj.factor_is_constant() {
            self.factor = Some(f.clone());
        }
        Ok(f)
    }

    fn leverage(&mut self, obj: &dyn FiniteSumObjective, factor: &DMatrix<f64>) -> Result<LeverageScores> {
        if let Some(l) = &self.leverage {
            return Ok(l.clone());
        }
        let l = LeverageScores::compute(factor)?;
        if obj.factor_is_constant() {
            self.leverage = Some(l.clone());
        }
        Ok(l)
    }
}

fn sample_plan(obj: &dyn FiniteSumObjective, x: &DVector<f64>, size: SampleSize, eps0: f64) -> Result<(usize, Sampling)> {
    Ok(match size {
        SampleSize::Fixed(s) => (s, Sampling::WithReplacement),
        SampleSize::Full => (obj.num_samples(), Sampling::FullPass),
        SampleSize::PoolFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::domain(format!("pool fraction must lie in (0, 1], got {f}")));
            }
            let pool = obj.curvature_pool(x).len();
            (((f * pool as f64).ceil() as usize).max(1), Sampling::WithReplacement)
        }
        SampleSize::Formula { delta } => {
            let b = obj.bounds();
            let s = uniform_sample_size(b.sample_hessian_bound, b.strong_convexity, obj.dim(), delta, eps0)?;
            (s, Sampling::WithReplacement)
        }
    })
}

/// Builds `H` at `x` for `method` with randomness from `seed`.
pub fn build_hessian(
    obj: &dyn FiniteSumObjective,
    x: &DVector<f64>,
    method: &HessianMethod,
    eps0: f64,
    seed: u64,
    allow_zero_alpha: bool,
    cache: &mut FactorCache,
) -> Result<ApproxHessian> {
    let h = match *method {
        HessianMethod::Exact => ApproxHessian::exact(obj, x),
        HessianMethod::ScaledIdentity { scale } => ApproxHessian::scaled_identity(obj.dim(), scale),
        HessianMethod::Sketched { kind, size } => {
            let factor = cache.factor(obj, x)?;
            let rows = size.rows(kind, obj.dim(), eps0);
            let sketch = match kind {
                SketchKind::LeverageScore => cache.leverage(obj, &factor)?.sample(rows, seed)?,
                SketchKind::Explicit => return Err(Error::domain("explicit sketches cannot be drawn per iteration")),
                oblivious => make_oblivious_sketch(oblivious, rows, factor.nrows(), seed)?,
            };
            sketched_hessian(&factor, &sketch)?
        }
        HessianMethod::Subsampled { size } => {
            let (s, sampling) = sample_plan(obj, x, size, eps0)?;
            subsampled_hessian_with(obj, x, s, seed, sampling)?
        }
        HessianMethod::Regularized { size, alpha } => {
            if !(alpha > 0.0 || (alpha == 0.0 && allow_zero_alpha)) {
                return Err(Error::domain(format!("regularizer alpha must be positive, got {alpha}")));
            }
            let (s, sampling) = sample_plan(obj, x, size, eps0)?;
            shift_diagonal(subsampled_hessian_with(obj, x, s, seed, sampling)?, alpha)
        }
        HessianMethod::NewSamp { size, rank } => {
            let (s, sampling) = sample_plan(obj, x, size, eps0)?;
            newsamp_from_subsampled(subsampled_hessian_with(obj, x, s, seed, sampling)?, rank)?
        }
    };
    Ok(h.with_eps0_target(eps0))
}

fn resolve_kappa(obj: &dyn FiniteSumObjective, source: KappaSource, x0: &DVector<f64>) -> f64 {
    let bounds = obj.bounds();
    let kappa = match source {
        KappaSource::ObjectiveBounds => bounds.condition_number(),
        KappaSource::PowerIteration => power_iteration(&obj.hessian(x0), 1000, 1e-12) / bounds.strong_convexity,
    };
    if kappa.is_finite() {
        kappa.max(1.0)
    } else {
        1.0
    }
}

/// Runs the approximate Newton iteration from `x0`.
///
/// Every step is `x ← x − p` with unit length. The stopping test always uses
/// the full gradient, whatever `cfg.gradient` says.
pub fn approximate_newton_run(obj: &dyn FiniteSumObjective, cfg: &SolverConfig, x0: &DVector<f64>) -> Result<IterationTrace> {
    approximate_newton_run_with(obj, cfg, x0, None)
}

/// As [`approximate_newton_run`], also filling `grad_mstar_norm` as
/// `‖mstar_half·∇F‖` on every row, so no snapshots are needed for it.
pub fn approximate_newton_run_with(
    obj: &dyn FiniteSumObjective,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    mstar_half: Option<&DMatrix<f64>>,
) -> Result<IterationTrace> {
    cfg.validate()?;
    if let Some(m) = mstar_half {
        if m.shape() != (obj.dim(), obj.dim()) {
            return Err(Error::shape("M* square root does not match the objective dimension"));
        }
    }
    if x0.len() != obj.dim() {
        return Err(Error::shape(format!("x0 has length {}, objective dimension is {}", x0.len(), obj.dim())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("x0 must be finite"));
    }
    let start = Instant::now();
    let kappa = resolve_kappa(obj, cfg.kappa, x0);
    let mut cache = FactorCache::default();
    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut t = 0;
    let status = loop {
        let g = obj.gradient(&x);
        let gnorm = g.norm();
        if !gnorm.is_finite() || x.iter().any(|v| !v.is_finite()) {
            break RunStatus::Diverged;
        }
        let keep = cfg.snapshots.keeps(t);
        records.push(IterationRecord {
            t,
            grad_norm: gnorm,
            grad_mstar_norm: mstar_half.map(|m| (m * &g).norm()),
            x: keep.then(|| x.clone()),
            gradient: keep.then(|| g.clone()),
            step: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if gnorm <= cfg.grad_tol {
            break RunStatus::Converged;
        }
        if gnorm > cfg.divergence_guard {
            break RunStatus::Diverged;
        }
        if t == cfg.max_iters {
            break RunStatus::MaxIters;
        }
        let (step, p) = take_step(obj, cfg, &x, g, t, kappa, &mut cache).map_err(|e| e.at_iteration(t))?;
        records.last_mut().expect("row pushed above").step = Some(step);
        x -= p;
        t += 1;
    };
    Ok(IterationTrace { records, status, kappa })
}

fn take_step(
    obj: &dyn FiniteSumObjective,
    cfg: &SolverConfig,
    x: &DVector<f64>,
    full_gradient: DVector<f64>,
    t: usize,
    kappa: f64,
    cache: &mut FactorCache,
) -> Result<(StepInfo, DVector<f64>)> {
    let warm = t < cfg.warm_start_newton_steps;
    let (method, inner) = if warm {
        (HessianMethod::Exact, InnerSolver::Exact)
    } else {
        (cfg.hessian, cfg.inner)
    };
    let eps0 = cfg.eps0.at(t);
    let h = build_hessian(
        obj,
        x,
        &method,
        eps0,
        derive_seed(cfg.seed, purpose::HESSIAN, t as u64),
        cfg.allow_zero_alpha,
        cache,
    )?;
    let (g, gradient_sampled) = match cfg.gradient {
        GradientMode::Subsampled(size) if !warm => (
            subsampled_gradient(obj, x, size, derive_seed(cfg.seed, purpose::GRADIENT, t as u64))?,
            true,
        ),
        _ => (full_gradient, false),
    };
    let sandwich = if cfg.certify {
        match check_spectral_sandwich(&h.matrix, &obj.hessian(x), eps0) {
            Ok(report) => Some(report),
            Err(Error::NotPositiveDefinite) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let outcome = if h.kind == HessianKind::ScaledIdentity {
        let scale = h.matrix[(0, 0)];
        let p = &g / scale;
        let residual = if g.norm() == 0.0 { 0.0 } else { (&g - &h.matrix * &p).norm() / g.norm() };
        super::InnerOutcome {
            p,
            relative_residual: residual,
            iterations: 0,
            stalled: false,
        }
    } else {
        solve_inner(&h.matrix, &g, inner, kappa)?
    };
    let info = StepInfo {
        hessian: h.kind,
        meta: h.meta,
        eps0,
        inner_residual: outcome.relative_residual,
        residual_target: inner.eps1() / kappa,
        inner_iterations: outcome.iterations,
        inner_stalled: outcome.stalled,
        gradient_sampled,
        sandwich,
    };
    Ok((info, outcome.p))
}
