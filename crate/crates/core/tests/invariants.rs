use approxnewton::hessian_approx::{
    newsamp_hessian, regularized_subsampled_hessian, subsampled_hessian, Eps0Branches,
};
use approxnewton::linalg::{asymmetry, sym_eigenvalues};
use approxnewton::metrics::{classify_sequence, compute_mstar_reference, mstar_norm, ClassifyOptions};
use approxnewton::problems::{synthetic_spectrum_matrix, synthetic_two_class, FiniteSumObjective, HingeSquaredSvm, LeastSquares};
use approxnewton::sketch::{make_leverage_sketch, make_oblivious_sketch, verify_subspace_embedding, SketchKind};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn ls(seed: u64) -> LeastSquares {
    LeastSquares::from_dataset(&synthetic_spectrum_matrix(40, 5, 1.3, seed).unwrap().data).unwrap()
}

fn svm(seed: u64) -> HingeSquaredSvm {
    HingeSquaredSvm::new(&synthetic_two_class(40, 5, 0.7, 0.1, seed).unwrap(), 3.0).unwrap()
}

fn vec5() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, 5).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn least_squares_hessian_is_constant(x in vec5(), y in vec5(), seed in 0u64..20) {
        let obj = ls(seed);
        prop_assert_eq!(obj.hessian(&x), obj.hessian(&y));
    }

    #[test]
    fn svm_hessian_eigenvalues_are_at_least_one(x in vec5(), seed in 0u64..20) {
        let eig = sym_eigenvalues(&svm(seed).hessian(&x));
        prop_assert!(eig[0] >= 1.0 - 1e-12);
    }

    #[test]
    fn builders_return_symmetric_matrices(x in vec5(), seed in 0u64..1000, size in 1usize..30, r in 1usize..5) {
        for obj in [&ls(3) as &dyn FiniteSumObjective, &svm(3)] {
            for m in [
                subsampled_hessian(obj, &x, size, seed).unwrap().matrix,
                regularized_subsampled_hessian(obj, &x, size, 0.3, seed).unwrap().matrix,
                newsamp_hessian(obj, &x, size, r, seed).unwrap().matrix,
            ] {
                prop_assert_eq!(asymmetry(&m), 0.0);
            }
        }
    }

    #[test]
    fn regularized_minus_alpha_is_subsampled(x in vec5(), seed in 0u64..1000, size in 1usize..30, alpha in 1e-3..10.0f64) {
        let obj = svm(5);
        let plain = subsampled_hessian(&obj, &x, size, seed).unwrap().matrix;
        let mut reg = regularized_subsampled_hessian(&obj, &x, size, alpha, seed).unwrap().matrix;
        for i in 0..5 {
            reg[(i, i)] -= alpha;
        }
        prop_assert!((reg - plain).amax() <= 4.0 * f64::EPSILON * alpha.max(1.0));
    }

    #[test]
    fn newsamp_floor_dominates_sampled_minimum(x in vec5(), seed in 0u64..1000, size in 1usize..30, r in 1usize..5) {
        let obj = ls(7);
        let sub = subsampled_hessian(&obj, &x, size, seed).unwrap();
        let ns = newsamp_hessian(&obj, &x, size, r, seed).unwrap();
        let floor = ns.meta.eigen_floor.unwrap();
        let ns_min = sym_eigenvalues(&ns.matrix)[0];
        let scale = sym_eigenvalues(&sub.matrix)[4].max(1.0);
        prop_assert!((ns_min - floor).abs() <= 1e-10 * scale);
        prop_assert!(floor >= sym_eigenvalues(&sub.matrix)[0] - 1e-10 * scale);
    }

    #[test]
    fn matched_alpha_second_branches_agree(beta in 1e-6..1e3f64, lambda in 1e-6..1e3f64, sigma in 1e-6..1e3f64) {
        let reg = Eps0Branches::regularized(beta + lambda, beta, sigma).second;
        let ns = Eps0Branches::newsamp(beta, lambda, sigma).second;
        prop_assert!((reg - ns).abs() <= 1e-12);
    }

    #[test]
    fn mstar_norm_is_a_norm(u in vec5(), v in vec5(), c in -5.0..5.0f64) {
        let obj = ls(2);
        let reference = compute_mstar_reference(&obj, &DVector::zeros(5)).unwrap();
        let nu = mstar_norm(&reference, &u).unwrap();
        let nv = mstar_norm(&reference, &v).unwrap();
        prop_assert!(nu >= 0.0);
        prop_assert!((mstar_norm(&reference, &(&u * c)).unwrap() - c.abs() * nu).abs() <= 1e-12 * nu.max(1.0));
        prop_assert!(mstar_norm(&reference, &(&u + &v)).unwrap() <= nu + nv + 1e-12);
    }

    #[test]
    fn classification_is_scale_free(rho in 0.05..0.95f64, n in 10usize..40, log_scale in -6.0..6.0f64) {
        let base: Vec<f64> = (0..n).map(|t| 1e3 * rho.powi(t as i32) * (1.0 + 0.2 * ((t * 7 % 3) as f64))).collect();
        let c = 10f64.powf(log_scale);
        let opts = ClassifyOptions { floor: 0.0, ..ClassifyOptions::default() };
        let a = classify_sequence(&base, &opts).unwrap();
        let scaled: Vec<f64> = base.iter().map(|r| r * c).collect();
        let b = classify_sequence(&scaled, &opts).unwrap();
        prop_assert_eq!(a.classification.label(), b.classification.label());
        if let (Some(ra), Some(rb)) = (a.classification.rho(), b.classification.rho()) {
            prop_assert!((ra - rb).abs() <= 1e-9 * ra.max(1.0));
        }
    }

    #[test]
    fn embedding_check_is_scale_equivariant(seed in 0u64..500, c in 1e-3..1e3f64) {
        let a = synthetic_spectrum_matrix(60, 4, 1.2, seed).unwrap().data.features;
        let scaled = &a * c;
        for kind in [SketchKind::Gaussian, SketchKind::SparseEmbedding] {
            let s = make_oblivious_sketch(kind, 30, 60, seed).unwrap();
            let e1 = verify_subspace_embedding(&s, &a, 0.5).unwrap().achieved_eps;
            let e2 = verify_subspace_embedding(&s, &scaled, 0.5).unwrap().achieved_eps;
            prop_assert!((e1 - e2).abs() <= 1e-9);
        }
        let s1 = make_leverage_sketch(&a, 30, seed).unwrap();
        let s2 = make_leverage_sketch(&scaled, 30, seed).unwrap();
        let e1 = verify_subspace_embedding(&s1, &a, 0.5).unwrap().achieved_eps;
        let e2 = verify_subspace_embedding(&s2, &scaled, 0.5).unwrap().achieved_eps;
        prop_assert!((e1 - e2).abs() <= 1e-9);
    }
}

#[test]
fn mstar_inverts_the_hessian_at_the_minimizer() {
    for obj in [&ls(4) as &dyn FiniteSumObjective, &svm(4)] {
        let reference = compute_mstar_reference(obj, &DVector::from_element(5, 1.0)).unwrap();
        let prod = &reference.mstar * &reference.hessian_at_star;
        assert!((prod - DMatrix::identity(5, 5)).amax() < 1e-8);
        let scale = obj.gradient(&DVector::from_element(5, 1.0)).norm().max(1.0);
        assert!(obj.gradient(&reference.x_star).norm() <= 1e-12 * scale);
    }
}

#[test]
fn mean_distortion_shrinks_with_sketch_size() {
    let d = 6;
    let a = synthetic_spectrum_matrix(800, d, 1.2, 1).unwrap().data.features;
    for kind in [SketchKind::Gaussian, SketchKind::SparseEmbedding, SketchKind::LeverageScore] {
        let means: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&f| {
                (0..50)
                    .map(|seed| {
                        let s = match kind {
                            SketchKind::LeverageScore => make_leverage_sketch(&a, f * d, seed).unwrap(),
                            _ => make_oblivious_sketch(kind, f * d, 800, seed).unwrap(),
                        };
                        verify_subspace_embedding(&s, &a, 0.5).unwrap().achieved_eps
                    })
                    .sum::<f64>()
                    / 50.0
            })
            .collect();
        assert!(means.windows(2).all(|w| w[1] <= w[0]), "{}: {means:?}", kind.label());
    }
}

#[test]
fn sketches_are_bit_reproducible() {
    let a = synthetic_spectrum_matrix(100, 4, 1.2, 1).unwrap().data.features;
    for kind in [SketchKind::Gaussian, SketchKind::SparseEmbedding] {
        let s1 = make_oblivious_sketch(kind, 20, 100, 9).unwrap();
        let s2 = make_oblivious_sketch(kind, 20, 100, 9).unwrap();
        assert_eq!(s1.apply(&a).unwrap(), s2.apply(&a).unwrap());
    }
    assert_eq!(
        make_leverage_sketch(&a, 20, 9).unwrap().apply(&a).unwrap(),
        make_leverage_sketch(&a, 20, 9).unwrap().apply(&a).unwrap()
    );
}
