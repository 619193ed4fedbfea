//! Randomized sketching operators and the ε-subspace-embedding check.
//!
//! Three constructions are provided: dense Gaussian projections (entries
//! `N(0, 1/s)`), sparse embeddings (one `±1` per input column in a uniformly
//! chosen output row) and leverage-score row sampling. All randomness comes
//! from the operator seed.
//!
//! Sketch sizes used by the embedding tests are `⌈40 d/ε²⌉` (Gaussian),
//! `⌈40 d ln d/ε²⌉` (leverage score) and `⌈8 d²/ε²⌉` (sparse embedding); the
//! constants were calibrated by Monte-Carlo runs of
//! [`verify_subspace_embedding`], see [`calibrated_sketch_size`].

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, thin_qr, RANK_TOLERANCE};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    Gaussian,
    SparseEmbedding,
    LeverageScore,
    /// A caller-supplied dense matrix.
    Explicit,
}

impl SketchKind {
    pub fn label(self) -> &'static str {
        match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::SparseEmbedding => "sparse",
            SketchKind::LeverageScore => "leverage",
            SketchKind::Explicit => "explicit",
        }
    }
}

/// Sketch size multiplier for a kind: `d`, `d ln d` or `d²` times the
/// calibrated constant. Explicit operators have no size rule.
pub fn calibrated_sketch_size(kind: SketchKind, d: usize, eps: f64) -> usize {
    let d = d as f64;
    let base = match kind {
        SketchKind::Gaussian => 40.0 * d,
        SketchKind::LeverageScore => 40.0 * d * d.ln().max(1.0),
        SketchKind::SparseEmbedding => 8.0 * d * d,
        SketchKind::Explicit => d,
    };
    (base / (eps * eps)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Dense(DMatrix<f64>),
    /// Column `j` of `S` has `sign[j]` in row `bucket[j]`.
    Hashed { bucket: Vec<usize>, sign: Vec<f64> },
    /// Row `k` of `S` is `weight[k] · e_{index[k]}ᵀ`.
    Sampled {
        index: Vec<usize>,
        weight: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

/// An `s×m` random linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    kind: SketchKind,
    rows: usize,
    cols: usize,
    seed: u64,
    payload: Payload,
}

fn check_shape(s: usize, m: usize) -> Result<()> {
    if s == 0 || m == 0 {
        return Err(Error::shape(format!("sketch dimensions must be positive, got s={s}, m={m}")));
    }
    Ok(())
}

/// Gaussian or sparse-embedding operator. Deterministic in `(kind, s, m, seed)`.
pub fn make_oblivious_sketch(kind: SketchKind, s: usize, m: usize, seed: u64) -> Result<SketchOperator> {
    check_shape(s, m)?;
    let mut rng = rng_from_seed(seed);
    let payload = match kind {
        SketchKind::Gaussian => {
            let scale = 1.0 / (s as f64).sqrt();
            Payload::Dense(DMatrix::from_fn(s, m, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        }
        SketchKind::SparseEmbedding => {
            let mut bucket = Vec::with_capacity(m);
            let mut sign = Vec::with_capacity(m);
            for _ in 0..m {
                bucket.push(rng.random_range(0..s));
                sign.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
            }
            Payload::Hashed { bucket, sign }
        }
        SketchKind::LeverageScore | SketchKind::Explicit => {
            return Err(Error::domain(format!("{kind:?} is not an oblivious sketch")));
        }
    };
    Ok(SketchOperator {
        kind,
        rows: s,
        cols: m,
        seed,
        payload,
    })
}

/// Row-sampling probabilities `p_i = ‖v_i‖²/d` from an orthonormal basis `V`
/// of `range(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores(Vec<f64>);

impl LeverageScores {
    pub fn compute(a: &DMatrix<f64>) -> Result<Self> {
        let (m, d) = a.shape();
        if m == 0 || d == 0 {
            return Err(Error::shape("leverage scores need a non-empty matrix"));
        }
        if m < d {
            return Err(Error::RankDeficient {
                smallest_singular_value: 0.0,
            });
        }
        let (q, r) = thin_qr(a);
        let smin = singular_values(&r).last().copied().unwrap_or(0.0);
        if !(smin > RANK_TOLERANCE) {
            return Err(Error::RankDeficient {
                smallest_singular_value: smin,
            });
        }
        let d = d as f64;
        Ok(LeverageScores(q.row_iter().map(|row| row.norm_squared() / d).collect()))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    /// Draws `s` rows i.i.d. with probabilities `p`; row `k` is rescaled by `1/√(p_i s)`.
    pub fn sample(&self, s: usize, seed: u64) -> Result<SketchOperator> {
        let m = self.0.len();
        check_shape(s, m)?;
        let dist = WeightedIndex::new(&self.0).map_err(|e| Error::domain(format!("leverage scores: {e}")))?;
        let mut rng = rng_from_seed(seed);
        let index: Vec<usize> = (0..s).map(|_| dist.sample(&mut rng)).collect();
        let weight = index.iter().map(|&i| 1.0 / (self.0[i] * s as f64).sqrt()).collect();
        Ok(SketchOperator {
            kind: SketchKind::LeverageScore,
            rows: s,
            cols: m,
            seed,
            payload: Payload::Sampled {
                index,
                weight,
                probabilities: self.0.clone(),
            },
        })
    }
}

/// Leverage-score sampling sketch for `a`.
pub fn make_leverage_sketch(a: &DMatrix<f64>, s: usize, seed: u64) -> Result<SketchOperator> {
    LeverageScores::compute(a)?.sample(s, seed)
}

impl SketchOperator {
    /// Wraps a dense matrix as an operator.
    pub fn explicit(matrix: DMatrix<f64>) -> Result<Self> {
        let (s, m) = matrix.shape();
        check_shape(s, m)?;
        Ok(SketchOperator {
            kind: SketchKind::Explicit,
            rows: s,
            cols: m,
            seed: 0,
            payload: Payload::Dense(matrix),
        })
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    /// Output dimension `s`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Input dimension `m`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sampling probabilities, for leverage-score operators.
    pub fn probabilities(&self) -> Option<&[f64]> {
        match &self.payload {
            Payload::Sampled { probabilities, .. } => Some(probabilities),
            _ => None,
        }
    }

    /// Sampled `(row index, weight)` pairs, for leverage-score operators.
    pub fn samples(&self) -> Option<Vec<(usize, f64)>> {
        match &self.payload {
            Payload::Sampled { index, weight, .. } => Some(index.iter().copied().zip(weight.iter().copied()).collect()),
            _ => None,
        }
    }

    /// The operator as a dense `s×m` matrix.
    pub fn materialize(&self) -> DMatrix<f64> {
        match &self.payload {
            Payload::Dense(m) => m.clone(),
            Payload::Hashed { bucket, sign } => {
                let mut out = DMatrix::zeros(self.rows, self.cols);
                for (j, (&b, &s)) in bucket.iter().zip(sign).enumerate() {
                    out[(b, j)] = s;
                }
                out
            }
            Payload::Sampled { index, weight, .. } => {
                let mut out = DMatrix::zeros(self.rows, self.cols);
                for (k, (&i, &w)) in index.iter().zip(weight).enumerate() {
                    out[(k, i)] = w;
                }
                out
            }
        }
    }

    /// `S A`.
    pub fn apply(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.cols {
            return Err(Error::shape(format!(
                "sketch expects {} input rows, matrix has {}",
                self.cols,
                a.nrows()
            )));
        }
        let d = a.ncols();
        Ok(match &self.payload {
            Payload::Dense(s) => s * a,
            Payload::Hashed { bucket, sign } => {
                // One pass over the rows of `a`.
                let mut out = DMatrix::zeros(self.rows, d);
                for (j, (&b, &s)) in bucket.iter().zip(sign).enumerate() {
                    for c in 0..d {
                        out[(b, c)] += s * a[(j, c)];
                    }
                }
                out
            }
            Payload::Sampled { index, weight, .. } => {
                DMatrix::from_fn(self.rows, d, |k, c| weight[k] * a[(index[k], c)])
            }
        })
    }

    /// `S v`.
    pub fn apply_vector(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Ok(self.apply(&m)?.column(0).into_owned())
    }
}

/// Result of checking `(1−ε)AᵀA ⪯ AᵀSᵀSA ⪯ (1+ε)AᵀA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingCheck {
    pub holds: bool,
    /// `max(1 − λ_min, λ_max − 1)` over the eigenvalues of
    /// `(AᵀA)^{-1/2} AᵀSᵀSA (AᵀA)^{-1/2}`.
    pub achieved_eps: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Spectral distortion of `sa = S·a` relative to `a`.
///
/// With `a = QR`, the eigenvalues of `(AᵀA)^{-1/2}(AᵀSᵀSA)(AᵀA)^{-1/2}` are
/// the squared singular values of `SQ = (SA) R⁻¹`; working with `SQ` avoids
/// squaring the condition number of `a`.
pub fn embedding_distortion(a: &DMatrix<f64>, sa: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (m, d) = a.shape();
    if sa.ncols() != d {
        return Err(Error::shape(format!("sketched matrix has {} columns, expected {d}", sa.ncols())));
    }
    if m < d {
        return Err(Error::RankDeficient {
            smallest_singular_value: 0.0,
        });
    }
    let (_, r) = thin_qr(a);
    let sv_r = singular_values(&r);
    let smin = sv_r.last().copied().unwrap_or(0.0);
    if !(smin > RANK_TOLERANCE) {
        return Err(Error::RankDeficient {
            smallest_singular_value: smin,
        });
    }
    // (SA) R⁻¹ = ((Rᵀ)⁻¹ (SA)ᵀ)ᵀ
    let sq_t = r
        .transpose()
        .solve_lower_triangular(&sa.transpose())
        .ok_or(Error::RankDeficient {
            smallest_singular_value: smin,
        })?;
    let sv = singular_values(&sq_t);
    let lambda_max = sv.first().map_or(0.0, |s| s * s);
    let lambda_min = if sa.nrows() < d {
        0.0
    } else {
        sv.last().map_or(0.0, |s| s * s)
    };
    Ok((lambda_min, lambda_max))
}

/// Exact spectral check of the ε-subspace-embedding property of `S` for `A`.
pub fn verify_subspace_embedding(s: &SketchOperator, a: &DMatrix<f64>, eps: f64) -> Result<EmbeddingCheck> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let sa = s.apply(a)?;
    let (lambda_min, lambda_max) = embedding_distortion(a, &sa)?;
    let achieved_eps = (1.0 - lambda_min).max(lambda_max - 1.0);
    Ok(EmbeddingCheck {
        holds: achieved_eps <= eps,
        achieved_eps,
        lambda_min,
        lambda_max,
    })
}
