//! `M*`-norm machinery, convergence-rate classification and the
//! per-iteration contraction diagnostics of the approximate Newton analysis.
//!
//! All rates are measured on `r_t = ‖∇F(x⁽ᵗ⁾)‖_{M*}` with
//! `M* = [∇²F(x*)]⁻¹`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_function, sym_spectral_norm, symmetrize};
use crate::problems::FiniteSumObjective;
use crate::solvers::{baseline_run, Baseline, IterationTrace};

/// Relative gradient tolerance of the reference Newton run.
pub const REFERENCE_TOLERANCE: f64 = 1e-13;
/// Relative gradient level still accepted when the reference run stagnates.
pub const REFERENCE_ACCEPT: f64 = 1e-12;
pub const REFERENCE_MAX_ITERS: usize = 200;

/// `x*` and the matrices defining `‖·‖_{M*}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MstarReference {
    pub x_star: DVector<f64>,
    pub hessian_at_star: DMatrix<f64>,
    pub mstar: DMatrix<f64>,
    pub mstar_half: DMatrix<f64>,
    pub newton_iterations: usize,
}

impl MstarReference {
    /// Reference from a known minimizer and its Hessian.
    pub fn from_parts(x_star: DVector<f64>, hessian_at_star: DMatrix<f64>) -> Result<Self> {
        let chol = cholesky(&hessian_at_star)?;
        let mut mstar = chol.inverse();
        symmetrize(&mut mstar);
        let mstar_half = sym_function(&hessian_at_star, |l| 1.0 / l.sqrt());
        Ok(MstarReference {
            x_star,
            hessian_at_star,
            mstar,
            mstar_half,
            newton_iterations: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }
}

/// Exact Newton from `x0` to `‖∇F‖ ≤ 1e−13·max(1, ‖∇F(x0)‖)`, then factorize.
pub fn compute_mstar_reference(obj: &dyn FiniteSumObjective, x0: &DVector<f64>) -> Result<MstarReference> {
    let scale = obj.gradient(x0).norm().max(1.0);
    let trace = baseline_run(obj, Baseline::FullNewton, x0, REFERENCE_MAX_ITERS, REFERENCE_TOLERANCE * scale)?;
    let iterations = trace.iterations();
    let last = trace.records.last().ok_or(Error::ReferenceNotConverged {
        grad_norm: f64::NAN,
        iterations,
    })?;
    // Rounding can stall Newton just above the target; take the best iterate.
    let best = trace
        .records
        .iter()
        .filter(|r| r.x.is_some())
        .min_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm))
        .unwrap_or(last);
    if !(best.grad_norm <= REFERENCE_ACCEPT * scale) {
        return Err(Error::ReferenceNotConverged {
            grad_norm: best.grad_norm,
            iterations,
        });
    }
    let x_star = best.x.clone().expect("full Newton keeps snapshots");
    let mut reference = MstarReference::from_parts(x_star.clone(), obj.hessian(&x_star))?;
    reference.newton_iterations = iterations;
    Ok(reference)
}

/// `‖v‖_{M*} = ‖(M*)^{1/2} v‖`.
pub fn mstar_norm(reference: &MstarReference, v: &DVector<f64>) -> Result<f64> {
    if v.len() != reference.dim() {
        return Err(Error::shape(format!("vector of length {} for dimension {}", v.len(), reference.dim())));
    }
    Ok((&reference.mstar_half * v).norm())
}

/// Fills `grad_mstar_norm` on every row that has a gradient snapshot, or an
/// iterate snapshot to recompute it from.
pub fn annotate(trace: &mut IterationTrace, reference: &MstarReference, obj: &dyn FiniteSumObjective) -> Result<()> {
    for row in &mut trace.records {
        let g = match (&row.gradient, &row.x) {
            (Some(g), _) => g.clone(),
            (None, Some(x)) => obj.gradient(x),
            (None, None) => continue,
        };
        row.grad_mstar_norm = Some(mstar_norm(reference, &g)?);
    }
    Ok(())
}

/// `(√L/μ)·ε`: bound on `‖x − x*‖` whenever `‖∇F(x)‖_{M*} ≤ ε`.
pub fn distance_bound_from_gradient(grad_mstar: f64, smoothness: f64, strong_convexity: f64) -> f64 {
    smoothness.sqrt() / strong_convexity * grad_mstar
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class", content = "rho")]
pub enum RateClass {
    Linear(f64),
    Superlinear,
    /// Fitted `ρ` in `r_{t+1} ≈ ρ r_t²`.
    Quadratic(f64),
    Diverged,
    Inconclusive,
}

impl RateClass {
    pub fn label(&self) -> &'static str {
        match self {
            RateClass::Linear(_) => "linear",
            RateClass::Superlinear => "superlinear",
            RateClass::Quadratic(_) => "quadratic",
            RateClass::Diverged => "diverged",
            RateClass::Inconclusive => "inconclusive",
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match *self {
            RateClass::Linear(r) | RateClass::Quadratic(r) => Some(r),
            _ => None,
        }
    }

    /// Superlinear and quadratic both count as faster than linear.
    pub fn is_superlinear_or_better(&self) -> bool {
        matches!(self, RateClass::Superlinear | RateClass::Quadratic(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub classification: RateClass,
    /// `1 − R²` of the quadratic fit, the final-to-initial ratio quotient of
    /// the superlinear test, or the log-ratio deviation quantile of the
    /// linear test, for whichever test decided (linear when none did).
    pub fit_residual: f64,
    /// Largest `|log q_t − mean|` over the window.
    pub max_log_deviation: f64,
    /// Half-open range of sequence indices used.
    pub window: (usize, usize),
    /// Geometric mean of the successive ratios over the window.
    pub mean_ratio: f64,
}

/// Calibration constants of the rate classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Values at or below this are rounding noise; the sequence is cut at
    /// the first such value.
    pub floor: f64,
    /// Leading iterations always excluded.
    pub skip: usize,
    /// Fraction of the usable sequence (from its end) forming the window.
    pub window_fraction: f64,
    pub min_usable: usize,
    pub quadratic_slope: (f64, f64),
    pub quadratic_r2: f64,
    pub superlinear_drop: f64,
    /// Band around the mean log-ratio for the linear test.
    pub linear_log_deviation: f64,
    /// Quantile of `|log q_t − mean|` that must fall inside the band. At 1
    /// this is the maximum deviation.
    pub linear_deviation_quantile: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            floor: 1e-13,
            skip: 2,
            window_fraction: 0.6,
            min_usable: 5,
            quadratic_slope: (1.8, 2.5),
            quadratic_r2: 0.98,
            superlinear_drop: 0.5,
            linear_log_deviation: 0.5,
            linear_deviation_quantile: 0.9,
        }
    }
}

/// Classifies a trace annotated by [`annotate`].
pub fn classify_rate(trace: &IterationTrace) -> Result<RateReport> {
    classify_rate_with(trace, &ClassifyOptions::default())
}

pub fn classify_rate_with(trace: &IterationTrace, opts: &ClassifyOptions) -> Result<RateReport> {
    if trace.status == crate::solvers::RunStatus::Diverged {
        return Ok(RateReport {
            classification: RateClass::Diverged,
            fit_residual: f64::NAN,
            max_log_deviation: f64::NAN,
            window: (0, trace.records.len()),
            mean_ratio: f64::NAN,
        });
    }
    let r: Vec<f64> = trace
        .records
        .iter()
        .map(|row| row.grad_mstar_norm)
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::InsufficientData("trace rows lack M*-norms; annotate the trace first".into()))?;
    classify_sequence(&r, opts)
}

/// Classifies a residual sequence `r_0, r_1, ...`.
pub fn classify_sequence(r: &[f64], opts: &ClassifyOptions) -> Result<RateReport> {
    let usable = r.iter().position(|&v| !(v > opts.floor && v.is_finite())).unwrap_or(r.len());
    if usable < opts.min_usable {
        return Err(Error::InsufficientData(format!(
            "{usable} residuals above {:e}, need {}",
            opts.floor, opts.min_usable
        )));
    }
    let span = (opts.window_fraction * usable as f64).ceil() as usize;
    let start = opts.skip.max(usable.saturating_sub(span)).min(usable - 3);
    let window = &r[start..usable];
    let logs: Vec<f64> = window.iter().map(|v| v.ln()).collect();
    let log_ratios: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_log = log_ratios.iter().sum::<f64>() / log_ratios.len() as f64;
    let mean_ratio = mean_log.exp();
    let mut deviations: Vec<f64> = log_ratios.iter().map(|l| (l - mean_log).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let max_log_deviation = deviations[deviations.len() - 1];
    let report = |classification, fit_residual| RateReport {
        classification,
        fit_residual,
        max_log_deviation,
        window: (start, usable),
        mean_ratio,
    };

    let (slope, intercept, r2) = linear_fit(&logs[..logs.len() - 1], &logs[1..]);
    if slope >= opts.quadratic_slope.0 && slope <= opts.quadratic_slope.1 && r2 >= opts.quadratic_r2 {
        return Ok(report(RateClass::Quadratic(intercept.exp()), 1.0 - r2));
    }

    let ratios: Vec<f64> = log_ratios.iter().map(|l| l.exp()).collect();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let drop = ratios[ratios.len() - 1] / ratios[0];
    if decreasing && drop < opts.superlinear_drop {
        return Ok(report(RateClass::Superlinear, drop));
    }

    let rank = ((opts.linear_deviation_quantile * deviations.len() as f64).ceil() as usize).clamp(1, deviations.len());
    let deviation = deviations[rank - 1];
    if mean_ratio > 0.0 && mean_ratio < 1.0 && deviation <= opts.linear_log_deviation {
        return Ok(report(RateClass::Linear(mean_ratio), deviation));
    }
    Ok(report(RateClass::Inconclusive, deviation))
}

/// Least-squares line `y ≈ slope·x + intercept` and its `R²`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return (f64::NAN, f64::NAN, 0.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Per-step quantities of the contraction bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionRow {
    pub t: usize,
    /// `r_{t+1} / r_t`.
    pub ratio: f64,
    /// `‖∇²F(x*) − ∇²F(x⁽ᵗ⁾)‖·√κ/μ`.
    pub eta: f64,
    /// `L·‖∇²F(x*)⁻¹ − ∇²F(x⁽ᵗ⁾)⁻¹‖`.
    pub nu: f64,
    /// `(ε₀ + ε₁/(1−ε₀) + 2η/(1−ε₀))·(1+ν)/(1−ν)`, infinite when `ν ≥ 1`.
    pub bound_rhs: f64,
    pub nu_out_of_range: bool,
    /// The step's sandwich held at `ε₀` and its inner residual met `ε₁/κ`.
    pub certified: bool,
    pub within_bound: bool,
}

/// `(ε₀ + ε₁/(1−ε₀) + 2η/(1−ε₀))·(1+ν)/(1−ν)`; `+∞` when `ν ≥ 1`.
pub fn contraction_bound(eps0: f64, eps1: f64, eta: f64, nu: f64) -> f64 {
    if nu >= 1.0 {
        return f64::INFINITY;
    }
    (eps0 + eps1 / (1.0 - eps0) + 2.0 * eta / (1.0 - eps0)) * (1.0 + nu) / (1.0 - nu)
}

/// Evaluates the contraction bound along a trace with `x` snapshots.
pub fn contraction_diagnostics(
    obj: &dyn FiniteSumObjective,
    trace: &IterationTrace,
    reference: &MstarReference,
    eps0: f64,
    eps1: f64,
) -> Result<Vec<ContractionRow>> {
    if !(eps0 >= 0.0 && eps0 < 1.0 && eps1 >= 0.0 && eps1 < 1.0) {
        return Err(Error::domain(format!("need eps0, eps1 in [0, 1), got {eps0}, {eps1}")));
    }
    if trace.records.iter().any(|r| r.x.is_none()) {
        return Err(Error::SnapshotsRequired);
    }
    let bounds = obj.bounds();
    let (l, mu) = (bounds.smoothness, bounds.strong_convexity);
    let kappa = l / mu;
    let h_star = &reference.hessian_at_star;
    let norms: Vec<f64> = trace
        .records
        .iter()
        .map(|row| {
            let x = row.x.as_ref().expect("checked above");
            let g = row.gradient.clone().unwrap_or_else(|| obj.gradient(x));
            mstar_norm(reference, &g)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(trace.iterations());
    for (i, row) in trace.records.iter().enumerate().take(trace.iterations()) {
        let x = row.x.as_ref().expect("checked above");
        let h_t = obj.hessian(x);
        let eta = sym_spectral_norm(&(h_star - &h_t)) * kappa.sqrt() / mu;
        let h_t_inv = cholesky(&h_t)?.inverse();
        let nu = l * sym_spectral_norm(&(&reference.mstar - h_t_inv));
        let bound_rhs = contraction_bound(eps0, eps1, eta, nu);
        let ratio = if norms[i] == 0.0 { 0.0 } else { norms[i + 1] / norms[i] };
        let certified = row.step.as_ref().is_some_and(|s| {
            s.sandwich.is_some_and(|sw| sw.achieved() <= eps0)
                && !s.inner_stalled
                && s.inner_residual <= (eps1 / trace.kappa).max(crate::solvers::CG_TOLERANCE_FLOOR) * (1.0 + 1e-9)
        });
        rows.push(ContractionRow {
            t: row.t,
            ratio,
            eta,
            nu,
            bound_rhs,
            nu_out_of_range: nu >= 1.0,
            certified,
            within_bound: ratio <= bound_rhs,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(f: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    fn unfloored() -> ClassifyOptions {
        ClassifyOptions {
            floor: 0.0,
            ..ClassifyOptions::default()
        }
    }

    #[test]
    fn geometric_is_linear() {
        let r = seq(|t| 0.5f64.powi(t as i32), 30);
        let rep = classify_sequence(&r, &ClassifyOptions::default()).unwrap();
        match rep.classification {
            RateClass::Linear(rho) => assert!((rho - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn doubly_exponential_is_quadratic() {
        let r = seq(|t| 10f64.powf(-(2f64.powi(t as i32))), 9);
        let rep = classify_sequence(&r, &unfloored()).unwrap();
        match rep.classification {
            RateClass::Quadratic(rho) => assert!((rho - 1.0).abs() < 1e-6, "{rho}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decaying_ratios_are_superlinear() {
        // r_{t+1} = r_t / (t + 2)²
        let mut r = vec![1.0];
        for t in 0..12 {
            let last = *r.last().unwrap();
            r.push(last / (t as f64 + 2.0).powi(2));
        }
        let rep = classify_sequence(&r, &unfloored()).unwrap();
        assert_eq!(rep.classification, RateClass::Superlinear);
    }

    #[test]
    fn stagnation_is_inconclusive() {
        let r = seq(|t| 1.0 + 0.1 * (t % 2) as f64, 20);
        assert_eq!(
            classify_sequence(&r, &ClassifyOptions::default()).unwrap().classification,
            RateClass::Inconclusive
        );
    }

    #[test]
    fn isolated_outlier_ratio_tolerated_only_by_quantile() {
        let mut r = vec![1.0];
        for t in 0..40 {
            let q = if t == 30 { 1.5 } else { 0.6 };
            let last = *r.last().unwrap();
            r.push(last * q);
        }
        let quantile = classify_sequence(&r, &ClassifyOptions::default()).unwrap();
        assert!(matches!(quantile.classification, RateClass::Linear(_)));
        assert!(quantile.max_log_deviation > 0.5);
        let strict = ClassifyOptions {
            linear_deviation_quantile: 1.0,
            ..ClassifyOptions::default()
        };
        assert_eq!(classify_sequence(&r, &strict).unwrap().classification, RateClass::Inconclusive);
    }

    #[test]
    fn short_sequences_rejected() {
        let r = [1.0, 0.1, 0.01, 1e-14, 0.0];
        assert!(matches!(classify_sequence(&r, &ClassifyOptions::default()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn scale_invariance() {
        let base = seq(|t| 0.7f64.powi(t as i32) * (1.0 + 0.1 * ((t * 7) % 3) as f64), 40);
        let opts = unfloored();
        let a = classify_sequence(&base, &opts).unwrap();
        for c in [1e-6, 3.0, 1e5] {
            let scaled: Vec<f64> = base.iter().map(|v| v * c).collect();
            let b = classify_sequence(&scaled, &opts).unwrap();
            assert_eq!(a.classification.label(), b.classification.label());
            assert!((a.mean_ratio - b.mean_ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn window_excludes_transient() {
        let mut r = vec![1.0, 1e-6];
        r.extend(seq(|t| 1e-6 * 0.5f64.powi(t as i32 + 1), 20));
        let rep = classify_sequence(&r, &ClassifyOptions::default()).unwrap();
        assert!(rep.window.0 >= 2);
        assert!(matches!(rep.classification, RateClass::Linear(_)));
    }

    #[test]
    fn bound_formula() {
        assert_eq!(contraction_bound(0.0, 0.0, 0.0, 0.0), 0.0);
        assert!((contraction_bound(0.5, 0.1, 0.0, 0.0) - 0.7).abs() < 1e-15);
        assert!((contraction_bound(0.5, 0.0, 0.25, 0.5) - 4.5).abs() < 1e-12);
        assert!(contraction_bound(0.1, 0.1, 0.0, 1.0).is_infinite());
    }

    #[test]
    fn distance_bound_formula() {
        assert_eq!(distance_bound_from_gradient(0.0, 4.0, 2.0), 0.0);
        assert_eq!(distance_bound_from_gradient(0.3, 1.0, 1.0), 0.3);
        assert!((distance_bound_from_gradient(1.0, 4.0, 0.5) - 4.0).abs() < 1e-15);
    }
}
