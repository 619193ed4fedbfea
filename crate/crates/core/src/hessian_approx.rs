//! Approximate Hessians `H⁽ᵗ⁾` and the spectral-sandwich certificate
//! `(1−ε₀)H ⪯ ∇²F ⪯ (1+ε₀)H`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, cholesky, sym_eigen_desc, sym_eigenvalues, symmetrize};
use crate::problems::FiniteSumObjective;
use crate::rng::rng_from_seed;
use crate::sketch::{SketchKind, SketchOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianKind {
    Exact,
    Sketched(SketchKind),
    Subsampled,
    RegularizedSubsampled,
    NewSamp,
    /// `c·I`, the gradient-descent surrogate.
    ScaledIdentity,
}

/// How sample indices are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Uniform i.i.d. draws.
    #[default]
    WithReplacement,
    /// Every index of the pool exactly once (`size` is ignored).
    FullPass,
}

/// Construction metadata of an [`ApproxHessian`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuildMeta {
    /// Sketch rows or number of sampled Hessians.
    pub size: usize,
    pub seed: u64,
    pub alpha: f64,
    pub rank: Option<usize>,
    /// `λ̂_{r+1}`, the NewSamp eigenvalue floor.
    pub eigen_floor: Option<f64>,
    pub eps0_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxHessian {
    pub matrix: DMatrix<f64>,
    pub kind: HessianKind,
    pub meta: BuildMeta,
}

impl ApproxHessian {
    pub fn exact(obj: &dyn FiniteSumObjective, x: &DVector<f64>) -> Self {
        let mut matrix = obj.hessian(x);
        symmetrize(&mut matrix);
        ApproxHessian {
            matrix,
            kind: HessianKind::Exact,
            meta: BuildMeta {
                size: obj.num_samples(),
                ..BuildMeta::default()
            },
        }
    }

    pub fn scaled_identity(d: usize, scale: f64) -> Self {
        ApproxHessian {
            matrix: DMatrix::identity(d, d) * scale,
            kind: HessianKind::ScaledIdentity,
            meta: BuildMeta::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_eps0_target(mut self, eps0: f64) -> Self {
        self.meta.eps0_target = Some(eps0);
        self
    }
}

/// Symmetrizes an assembled matrix. Assembly is symmetric up to rounding.
fn finish(mut m: DMatrix<f64>) -> DMatrix<f64> {
    debug_assert!(
        asymmetry(&m) <= 1e-12 * m.amax().max(1.0),
        "assembled Hessian asymmetric by {}",
        asymmetry(&m)
    );
    symmetrize(&mut m);
    m
}

/// `(SB)ᵀ(SB)` for a Hessian factor `B` with `BᵀB = ∇²F(x)`.
pub fn sketched_hessian(factor: &DMatrix<f64>, sketch: &SketchOperator) -> Result<ApproxHessian> {
    if sketch.cols() != factor.nrows() {
        return Err(Error::shape(format!(
            "sketch has {} columns, factor has {} rows",
            sketch.cols(),
            factor.nrows()
        )));
    }
    let sb = sketch.apply(factor)?;
    Ok(ApproxHessian {
        matrix: finish(sb.tr_mul(&sb)),
        kind: HessianKind::Sketched(sketch.kind()),
        meta: BuildMeta {
            size: sketch.rows(),
            seed: sketch.seed(),
            ..BuildMeta::default()
        },
    })
}

fn draw_indices(pool: &[usize], size: usize, seed: u64, sampling: Sampling) -> Vec<usize> {
    match sampling {
        Sampling::FullPass => pool.to_vec(),
        Sampling::WithReplacement => {
            let mut rng = rng_from_seed(seed);
            (0..size).map(|_| pool[rng.random_range(0..pool.len())]).collect()
        }
    }
}

/// Mean of `size` uniformly sampled per-sample Hessians plus the ridge term.
///
/// Samples are drawn from the objective's curvature pool (all samples for
/// least squares, the current support vectors for the SVM) and rescaled by
/// `|pool|/n`, so the estimate is unbiased for `∇²F(x)`.
pub fn subsampled_hessian(obj: &dyn FiniteSumObjective, x: &DVector<f64>, size: usize, seed: u64) -> Result<ApproxHessian> {
    subsampled_hessian_with(obj, x, size, seed, Sampling::WithReplacement)
}

pub fn subsampled_hessian_with(
    obj: &dyn FiniteSumObjective,
    x: &DVector<f64>,
    size: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<ApproxHessian> {
    if size == 0 && sampling == Sampling::WithReplacement {
        return Err(Error::shape("sample size must be at least 1"));
    }
    let d = obj.dim();
    let n = obj.num_samples() as f64;
    let pool = obj.curvature_pool(x);
    let mut matrix = DMatrix::identity(d, d) * obj.ridge();
    let used = if pool.is_empty() {
        0
    } else {
        let picked = draw_indices(&pool, size, seed, sampling);
        let scale = pool.len() as f64 / (n * picked.len() as f64);
        matrix += obj.sample_hessian_sum(&picked, x) * scale;
        picked.len()
    };
    Ok(ApproxHessian {
        matrix: finish(matrix),
        kind: HessianKind::Subsampled,
        meta: BuildMeta {
            size: used,
            seed,
            ..BuildMeta::default()
        },
    })
}

/// `H + α I`. No check on α; use [`regularized_subsampled_hessian`] for the
/// validated construction.
pub fn shift_diagonal(mut h: ApproxHessian, alpha: f64) -> ApproxHessian {
    for i in 0..h.matrix.nrows() {
        h.matrix[(i, i)] += alpha;
    }
    h.kind = HessianKind::RegularizedSubsampled;
    h.meta.alpha = alpha;
    h
}

/// Subsampled Hessian plus `α I`, so `λ_min ≥ α`.
pub fn regularized_subsampled_hessian(
    obj: &dyn FiniteSumObjective,
    x: &DVector<f64>,
    size: usize,
    alpha: f64,
    seed: u64,
) -> Result<ApproxHessian> {
    regularized_subsampled_hessian_with(obj, x, size, alpha, seed, Sampling::WithReplacement)
}

pub fn regularized_subsampled_hessian_with(
    obj: &dyn FiniteSumObjective,
    x: &DVector<f64>,
    size: usize,
    alpha: f64,
    seed: u64,
    sampling: Sampling,
) -> Result<ApproxHessian> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("regularizer alpha must be positive, got {alpha}")));
    }
    Ok(shift_diagonal(subsampled_hessian_with(obj, x, size, seed, sampling)?, alpha))
}

/// Replaces every eigenvalue of `h` beyond the top `r` with `λ_{r+1}`.
pub fn newsamp_from_subsampled(mut h: ApproxHessian, r: usize) -> Result<ApproxHessian> {
    let d = h.dim();
    if r >= d {
        return Err(Error::domain(format!("target rank r={r} must be below d={d}")));
    }
    let (mut values, vectors) = sym_eigen_desc(&h.matrix);
    let floor = values[r];
    for v in values.iter_mut().skip(r) {
        *v = floor;
    }
    let m = &vectors * DMatrix::from_diagonal(&DVector::from_vec(values)) * vectors.transpose();
    h.matrix = finish(m);
    h.kind = HessianKind::NewSamp;
    h.meta.rank = Some(r);
    h.meta.eigen_floor = Some(floor);
    Ok(h)
}

/// NewSamp: subsampled Hessian with its tail spectrum floored at `λ̂_{r+1}`.
pub fn newsamp_hessian(obj: &dyn FiniteSumObjective, x: &DVector<f64>, size: usize, r: usize, seed: u64) -> Result<ApproxHessian> {
    if r >= obj.dim() {
        return Err(Error::domain(format!("target rank r={r} must be below d={}", obj.dim())));
    }
    newsamp_from_subsampled(subsampled_hessian(obj, x, size, seed)?, r)
}

/// The `(r+1)`-th eigenvalue of the sampled and of the true Hessian.
/// Both are reported because the NewSamp `ε₀` analysis refers to each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewSampFloors {
    pub sampled: f64,
    pub exact: f64,
}

pub fn newsamp_floors(subsampled: &DMatrix<f64>, exact: &DMatrix<f64>, r: usize) -> Result<NewSampFloors> {
    let d = subsampled.nrows();
    if r >= d || exact.nrows() != d {
        return Err(Error::domain(format!("need r < d and matching shapes (r={r}, d={d})")));
    }
    let pick = |m: &DMatrix<f64>| {
        let mut v = sym_eigenvalues(m);
        v.reverse();
        v[r]
    };
    Ok(NewSampFloors {
        sampled: pick(subsampled),
        exact: pick(exact),
    })
}

/// Mean of `size` uniformly sampled per-sample gradients plus the ridge gradient.
pub fn subsampled_gradient(obj: &dyn FiniteSumObjective, x: &DVector<f64>, size: usize, seed: u64) -> Result<DVector<f64>> {
    subsampled_gradient_with(obj, x, size, seed, Sampling::WithReplacement)
}

pub fn subsampled_gradient_with(
    obj: &dyn FiniteSumObjective,
    x: &DVector<f64>,
    size: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<DVector<f64>> {
    if size == 0 && sampling == Sampling::WithReplacement {
        return Err(Error::shape("gradient sample size must be at least 1"));
    }
    let pool: Vec<usize> = (0..obj.num_samples()).collect();
    let picked = draw_indices(&pool, size, seed, sampling);
    let mut g = x * obj.ridge();
    let inv = 1.0 / picked.len() as f64;
    for &i in &picked {
        g.axpy(inv, &obj.sample_gradient(i, x), 1.0);
    }
    Ok(g)
}

/// `⌈16 K² ln(2d/δ) / (s² ε₀²)⌉`, where `s` is `σ` (pass the target `ε₀`)
/// or `β` (pass `ε₀ = 1`).
pub fn uniform_sample_size(k: f64, sigma_or_beta: f64, d: usize, delta: f64, eps0: f64) -> Result<usize> {
    if !(k > 0.0 && sigma_or_beta > 0.0 && d >= 1) {
        return Err(Error::domain("K, sigma/beta and d must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(eps0 > 0.0 && eps0 <= 1.0) {
        return Err(Error::domain(format!("eps0 must lie in (0, 1], got {eps0}")));
    }
    let size = 16.0 * k * k * (2.0 * d as f64 / delta).ln() / (sigma_or_beta * sigma_or_beta * eps0 * eps0);
    if !size.is_finite() || size > usize::MAX as f64 {
        return Err(Error::domain("sample size overflows"));
    }
    Ok(size.ceil() as usize)
}

/// The two competing terms of an `ε₀` guarantee; the guarantee is their max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eps0Branches {
    pub first: f64,
    pub second: f64,
}

impl Eps0Branches {
    pub fn value(&self) -> f64 {
        self.first.max(self.second)
    }

    /// `max((β−α)/(σ+α−β), (α+β)/(σ+α+β))` for `H = H_S + α I` with
    /// `‖H_S − ∇²F‖ ≤ β`.
    pub fn regularized(alpha: f64, beta: f64, sigma: f64) -> Self {
        Eps0Branches {
            first: (beta - alpha) / (sigma + alpha - beta),
            second: (alpha + beta) / (sigma + alpha + beta),
        }
    }

    /// `max(β/(λ_{r+1}−β), (2β+λ_{r+1})/(σ+2β+λ_{r+1}))` for NewSamp.
    pub fn newsamp(beta: f64, lambda_next: f64, sigma: f64) -> Self {
        Eps0Branches {
            first: beta / (lambda_next - beta),
            second: (2.0 * beta + lambda_next) / (sigma + 2.0 * beta + lambda_next),
        }
    }
}

/// `ε₀` of the regularized subsampled Hessian; requires `0 < β < α + σ/2`.
pub fn regularized_eps0(alpha: f64, beta: f64, sigma: f64) -> Result<f64> {
    if !(alpha > 0.0 && sigma > 0.0 && beta > 0.0 && beta < alpha + sigma / 2.0) {
        return Err(Error::domain(format!(
            "need alpha > 0, sigma > 0 and 0 < beta < alpha + sigma/2 (alpha={alpha}, beta={beta}, sigma={sigma})"
        )));
    }
    Ok(Eps0Branches::regularized(alpha, beta, sigma).value())
}

/// `ε₀` of NewSamp; requires `0 < β < λ_{r+1}/2`.
pub fn newsamp_eps0(beta: f64, lambda_next: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && beta > 0.0 && beta < lambda_next / 2.0) {
        return Err(Error::domain(format!(
            "need sigma > 0 and 0 < beta < lambda_(r+1)/2 (beta={beta}, lambda={lambda_next})"
        )));
    }
    Ok(Eps0Branches::newsamp(beta, lambda_next, sigma).value())
}

/// Outcome of the spectral sandwich test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// `max(0, 1 − μ_min)`: how far `(1−ε)H ⪯ ∇²F` is from holding at ε = 0.
    pub eps_lower: f64,
    /// `max(0, μ_max − 1)`.
    pub eps_upper: f64,
    pub eps0: f64,
    pub holds: bool,
}

impl SandwichReport {
    pub fn achieved(&self) -> f64 {
        self.eps_lower.max(self.eps_upper)
    }
}

/// Eigenvalues `μ` of `H^{-1/2} ∇²F H^{-1/2}` decide
/// `(1−ε₀)H ⪯ ∇²F ⪯ (1+ε₀)H`.
pub fn check_spectral_sandwich(h: &DMatrix<f64>, true_h: &DMatrix<f64>, eps0: f64) -> Result<SandwichReport> {
    if h.shape() != true_h.shape() || h.nrows() != h.ncols() {
        return Err(Error::shape("sandwich needs two square matrices of equal size"));
    }
    let chol = cholesky(h)?;
    cholesky(true_h)?;
    let l = chol.l();
    // L⁻¹ T L⁻ᵀ
    let left = l.solve_lower_triangular(true_h).ok_or(Error::NotPositiveDefinite)?;
    let mut m = l
        .solve_lower_triangular(&left.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    symmetrize(&mut m);
    let mu = sym_eigenvalues(&m);
    let eps_lower = (1.0 - mu[0]).max(0.0);
    let eps_upper = (mu[mu.len() - 1] - 1.0).max(0.0);
    Ok(SandwichReport {
        eps_lower,
        eps_upper,
        eps0,
        holds: eps_lower.max(eps_upper) <= eps0,
    })
}
