//! Dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Singular values below this are treated as zero when checking column rank.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Largest absolute difference between `m` and its transpose.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `m` by `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)
        .into_iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `f(M)` for symmetric `M`, applied through its eigenvalues.
pub fn sym_function(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let scaled = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&scaled) * v.transpose();
    symmetrize(&mut out);
    out
}

/// Returns `(σ_max, σ_min)` or `RankDeficient` when `σ_min ≤ RANK_TOLERANCE`.
pub fn ensure_full_column_rank(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if a.nrows() < a.ncols() {
        return Err(Error::RankDeficient {
            smallest_singular_value: 0.0,
        });
    }
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if !(smin > RANK_TOLERANCE) {
        return Err(Error::RankDeficient {
            smallest_singular_value: smin,
        });
    }
    Ok((smax, smin))
}

/// Thin QR factorization `a = q r` with `q` of shape `m×d`.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// A Haar-distributed `rows×cols` matrix with orthonormal columns (`rows ≥ cols`).
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (mut q, r) = thin_qr(&g);
    // Sign fix makes the distribution Haar rather than QR-convention dependent.
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Cholesky factor of an SPD matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    m.clone().cholesky().ok_or(Error::NotPositiveDefinite)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn power_iteration(m: &DMatrix<f64>, max_iters: usize, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, not orthogonal to any coordinate axis.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}
