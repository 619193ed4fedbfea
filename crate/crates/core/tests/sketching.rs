use approxnewton::hessian_approx::{check_spectral_sandwich, sketched_hessian};
use approxnewton::linalg::sym_eigenvalues;
use approxnewton::problems::synthetic_spectrum_matrix;
use approxnewton::rng::rng_from_seed;
use approxnewton::sketch::{
    calibrated_sketch_size, make_leverage_sketch, make_oblivious_sketch, verify_subspace_embedding, SketchKind,
    SketchOperator,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian_matrix(m: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn sketch_for(kind: SketchKind, a: &DMatrix<f64>, s: usize, seed: u64) -> SketchOperator {
    match kind {
        SketchKind::LeverageScore => make_leverage_sketch(a, s, seed).unwrap(),
        _ => make_oblivious_sketch(kind, s, a.nrows(), seed).unwrap(),
    }
}

// Eigenvalues of (AᵀA)^{-1} AᵀSᵀSA through a plain inverse, independent of
// the QR route used by the library.
fn distortion_by_inverse(a: &DMatrix<f64>, sa: &DMatrix<f64>) -> (f64, f64) {
    let gram = a.tr_mul(a);
    let l = gram.clone().cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let m = &linv * sa.tr_mul(sa) * linv.transpose();
    let eig = sym_eigenvalues(&m);
    (eig[0], eig[eig.len() - 1])
}

#[test]
fn calibrated_sizes_embed_with_high_probability() {
    let a = gaussian_matrix(1500, 6, 3);
    for kind in [SketchKind::Gaussian, SketchKind::SparseEmbedding, SketchKind::LeverageScore] {
        let s = calibrated_sketch_size(kind, 6, 0.5);
        let hits = (0..40)
            .filter(|&seed| verify_subspace_embedding(&sketch_for(kind, &a, s, seed), &a, 0.5).unwrap().holds)
            .count();
        assert!(hits >= 38, "{}: {hits}/40", kind.label());
    }
}

#[test]
fn library_distortion_matches_inverse_route() {
    let a = gaussian_matrix(300, 5, 1);
    for kind in [SketchKind::Gaussian, SketchKind::SparseEmbedding, SketchKind::LeverageScore] {
        let s = sketch_for(kind, &a, 120, 7);
        let check = verify_subspace_embedding(&s, &a, 0.5).unwrap();
        let (lo, hi) = distortion_by_inverse(&a, &s.apply(&a).unwrap());
        assert!((check.lambda_min - lo).abs() < 1e-9, "{}", kind.label());
        assert!((check.lambda_max - hi).abs() < 1e-9, "{}", kind.label());
    }
}

#[test]
fn structured_apply_matches_materialized_operator() {
    let a = gaussian_matrix(80, 3, 2);
    for kind in [SketchKind::Gaussian, SketchKind::SparseEmbedding, SketchKind::LeverageScore] {
        let s = sketch_for(kind, &a, 25, 11);
        let dense = s.materialize();
        assert_eq!(dense.shape(), (25, 80));
        assert!((s.apply(&a).unwrap() - &dense * &a).norm() < 1e-10);
    }
}

#[test]
fn sketched_hessian_sandwich_follows_embedding_quality() {
    let syn = synthetic_spectrum_matrix(600, 8, 1.3, 2).unwrap();
    let a = &syn.data.features;
    let exact = a.tr_mul(a);
    for kind in [SketchKind::Gaussian, SketchKind::SparseEmbedding, SketchKind::LeverageScore] {
        for seed in 0..10 {
            let s = sketch_for(kind, a, 200, seed);
            let emb = verify_subspace_embedding(&s, a, 0.99).unwrap();
            if emb.lambda_min <= 0.0 {
                continue;
            }
            let h = sketched_hessian(a, &s).unwrap();
            let sw = check_spectral_sandwich(&h.matrix, &exact, 0.5).unwrap();
            let e = emb.achieved_eps;
            if e < 1.0 {
                assert!(sw.achieved() <= e / (1.0 - e) + 1e-9, "{}: {} vs {e}", kind.label(), sw.achieved());
            }
            assert!((sw.eps_upper - (1.0 / emb.lambda_min - 1.0)).abs() < 1e-8);
            assert!((sw.eps_lower - (1.0 - 1.0 / emb.lambda_max)).abs() < 1e-8);
        }
    }
}

#[test]
fn four_d_gaussian_sketch_is_far_from_a_half_sandwich() {
    let syn = synthetic_spectrum_matrix(2000, 54, 1.2, 1).unwrap();
    let a = &syn.data.features;
    let exact = a.tr_mul(a);
    let mut worst_small = 0.0_f64;
    let mut holds_large = 0;
    for seed in 0..10 {
        let small = sketched_hessian(a, &make_oblivious_sketch(SketchKind::Gaussian, 4 * 54, 2000, seed).unwrap()).unwrap();
        worst_small = worst_small.max(check_spectral_sandwich(&small.matrix, &exact, 0.5).unwrap().achieved());
        let large = sketched_hessian(a, &make_oblivious_sketch(SketchKind::Gaussian, 32 * 54, 2000, seed).unwrap()).unwrap();
        holds_large += usize::from(check_spectral_sandwich(&large.matrix, &exact, 0.5).unwrap().holds);
    }
    assert!(worst_small > 1.0, "{worst_small}");
    assert!(holds_large >= 9, "{holds_large}/10");
}
