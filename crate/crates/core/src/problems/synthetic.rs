use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::random_orthonormal;
use crate::rng::{derive_seed, purpose, rng_from_seed};

/// Standard deviation of the Gaussian noise added to `A x_true`.
pub const LABEL_NOISE_STD: f64 = 1e-3;

/// A least-squares instance with a prescribed spectrum.
#[derive(Debug, Clone)]
pub struct SyntheticLeastSquares {
    pub data: Dataset,
    pub x_true: DVector<f64>,
    /// Descending; `σ_i = decay^(−i)`, `i = 1..d` for the decay family.
    pub singular_values: Vec<f64>,
}

impl SyntheticLeastSquares {
    /// `σ_1 / σ_d = decay^(d − 1)`.
    pub fn condition_number(&self) -> f64 {
        self.singular_values[0] / self.singular_values[self.singular_values.len() - 1]
    }
}

/// `A = U Σ Vᵀ` with seeded Haar `U` (`n×d`), `V` (`d×d`) and
/// `σ_i = decay^(−i)`; labels `b = A x_true + N(0, 1e-6)` noise.
pub fn synthetic_spectrum_matrix(n: usize, d: usize, decay: f64, seed: u64) -> Result<SyntheticLeastSquares> {
    if !(decay > 1.0) || !decay.is_finite() {
        return Err(Error::domain(format!("decay must exceed 1, got {decay}")));
    }
    let singular_values: Vec<f64> = (1..=d).map(|i| decay.powi(-(i as i32))).collect();
    synthetic_with_spectrum(n, singular_values, seed, format!("synthetic_n{n}_d{d}_decay{decay}"))
}

/// As [`synthetic_spectrum_matrix`] with arbitrary positive singular values
/// (sorted descending before use); `d` is their count.
pub fn synthetic_with_spectrum(
    n: usize,
    mut singular_values: Vec<f64>,
    seed: u64,
    name: impl Into<String>,
) -> Result<SyntheticLeastSquares> {
    let d = singular_values.len();
    if d == 0 || n < d {
        return Err(Error::shape(format!("need n >= d >= 1, got n={n}, d={d}")));
    }
    if singular_values.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::domain("singular values must be positive and finite"));
    }
    singular_values.sort_by(|a, b| b.total_cmp(a));

    let mut rng = rng_from_seed(derive_seed(seed, purpose::DATA, 0));
    let mut u = random_orthonormal(n, d, &mut rng);
    let v = random_orthonormal(d, d, &mut rng);
    for (j, s) in singular_values.iter().enumerate() {
        u.column_mut(j).scale_mut(*s);
    }
    let a = u * v.transpose();

    let mut rng = rng_from_seed(derive_seed(seed, purpose::NOISE, 0));
    let x_true = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = DVector::from_fn(n, |_, _| LABEL_NOISE_STD * rng.sample::<f64, _>(StandardNormal));
    let b = &a * &x_true + noise;

    let data = Dataset::new(a, b, name)?;
    Ok(SyntheticLeastSquares {
        data,
        x_true,
        singular_values,
    })
}

/// Two overlapping Gaussian classes for SVM experiments.
///
/// Rows are `b_i · separation · u + z_i / √d` with a random unit `u` and
/// `z_i ~ N(0, I)`; a fraction `flip` of labels is then flipped.
pub fn synthetic_two_class(n: usize, d: usize, separation: f64, flip: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::shape("need n >= 1 and d >= 1"));
    }
    if !(0.0..=0.5).contains(&flip) {
        return Err(Error::domain(format!("flip fraction must lie in [0, 0.5], got {flip}")));
    }
    let mut rng = rng_from_seed(derive_seed(seed, purpose::DATA, 1));
    let mut dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    dir /= dir.norm();
    let scale = 1.0 / (d as f64).sqrt();
    let mut labels = DVector::zeros(n);
    let mut features = DMatrix::zeros(n, d);
    for i in 0..n {
        let class = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for j in 0..d {
            features[(i, j)] = class * separation * dir[j] + scale * rng.sample::<f64, _>(StandardNormal);
        }
        labels[i] = if rng.random::<f64>() < flip { -class } else { class };
    }
    Dataset::new(features, labels, format!("two_class_n{n}_d{d}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;

    #[test]
    fn singular_values_match_prescribed_spectrum() {
        let s = synthetic_spectrum_matrix(100, 10, 1.5, 7).unwrap();
        let computed = singular_values(&s.data.features);
        for (i, sv) in computed.iter().enumerate() {
            let expected = 1.5_f64.powi(-(i as i32 + 1));
            assert!((sv - expected).abs() < 1e-8, "σ_{} = {sv}, expected {expected}", i + 1);
        }
    }

    #[test]
    fn single_column_is_perfectly_conditioned() {
        let s = synthetic_spectrum_matrix(5, 1, 3.0, 1).unwrap();
        assert_eq!(s.condition_number(), 1.0);
    }

    #[test]
    fn rejects_wide_matrices_and_bad_decay() {
        assert!(matches!(synthetic_spectrum_matrix(3, 4, 1.2, 0), Err(Error::Shape(_))));
        assert!(matches!(synthetic_spectrum_matrix(5, 4, 1.0, 0), Err(Error::Domain(_))));
        assert!(matches!(synthetic_with_spectrum(5, vec![1.0, 0.0], 0, "x"), Err(Error::Domain(_))));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = synthetic_spectrum_matrix(30, 4, 1.2, 9).unwrap();
        let b = synthetic_spectrum_matrix(30, 4, 1.2, 9).unwrap();
        let c = synthetic_spectrum_matrix(30, 4, 1.2, 10).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn two_class_labels_are_binary() {
        let data = synthetic_two_class(50, 3, 0.5, 0.1, 4).unwrap();
        data.check_binary_labels().unwrap();
        assert_eq!(data.features.shape(), (50, 3));
    }
}
