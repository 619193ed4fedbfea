use approxnewton::problems::{
    check_derivatives, synthetic_spectrum_matrix, synthetic_two_class, FiniteSumObjective, HingeSquaredSvm, LeastSquares,
};
use approxnewton::rng::rng_from_seed;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

fn random_point(d: usize, scale: f64, seed: u64) -> DVector<f64> {
    let mut rng = rng_from_seed(seed);
    DVector::from_fn(d, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    })
}

#[test]
fn least_squares_derivatives_match_finite_differences() {
    let syn = synthetic_spectrum_matrix(40, 6, 1.3, 4).unwrap();
    let obj = LeastSquares::from_dataset(&syn.data).unwrap();
    for seed in 0..5 {
        let x = random_point(6, 1.0, seed);
        let err = check_derivatives(&obj, &x, 1e-5);
        assert!(err.gradient < 1e-5, "gradient error {}", err.gradient);
        assert!(err.hessian < 1e-4, "hessian error {}", err.hessian);
    }
}

#[test]
fn svm_derivatives_match_away_from_kinks() {
    let data = synthetic_two_class(60, 5, 1.0, 0.1, 8).unwrap();
    let obj = HingeSquaredSvm::new(&data, 3.0).unwrap();
    let h = 1e-6;
    let max_row = (0..data.num_samples())
        .map(|i| data.features.row(i).norm())
        .fold(0.0, f64::max);
    let mut checked = 0;
    for seed in 0..40 {
        let x = random_point(5, 0.5, seed);
        if obj.kink_distance(&x) <= 10.0 * h * max_row {
            continue;
        }
        let err = check_derivatives(&obj, &x, h);
        assert!(err.gradient < 1e-5, "gradient error {}", err.gradient);
        assert!(err.hessian < 1e-4, "hessian error {}", err.hessian);
        checked += 1;
    }
    assert!(checked >= 20);
}

#[test]
fn averages_of_sample_terms_give_the_full_quantities() {
    let data = synthetic_two_class(25, 4, 0.5, 0.0, 1).unwrap();
    let objs: Vec<Box<dyn FiniteSumObjective>> = vec![
        Box::new(HingeSquaredSvm::new(&data, 2.0).unwrap()),
        Box::new(LeastSquares::from_dataset(&data).unwrap()),
    ];
    let x = random_point(4, 0.3, 9);
    for obj in &objs {
        let n = obj.num_samples();
        let d = obj.dim();
        let mut g = x.clone() * obj.ridge();
        let mut h = DMatrix::identity(d, d) * obj.ridge();
        for i in 0..n {
            g += obj.sample_gradient(i, &x) / n as f64;
            h += obj.sample_hessian(i, &x) / n as f64;
        }
        assert!((&g - obj.gradient(&x)).norm() < 1e-10 * g.norm().max(1.0));
        assert!((&h - obj.hessian(&x)).norm() < 1e-10 * h.norm().max(1.0));
    }
}

#[test]
fn hessian_factor_reproduces_the_hessian() {
    let data = synthetic_two_class(30, 4, 1.0, 0.0, 5).unwrap();
    let svm = HingeSquaredSvm::new(&data, 5.0).unwrap();
    let ls = LeastSquares::from_dataset(&data).unwrap();
    let x = random_point(4, 0.4, 2);
    for obj in [&svm as &dyn FiniteSumObjective, &ls] {
        let b = obj.hessian_factor(&x).expect("factor available");
        let h = obj.hessian(&x);
        assert!((b.tr_mul(&b) - &h).norm() < 1e-10 * h.norm());
    }
}

#[test]
fn curvature_bounds_hold_at_random_points() {
    let data = synthetic_two_class(50, 4, 1.0, 0.05, 6).unwrap();
    let obj = HingeSquaredSvm::new(&data, 4.0).unwrap();
    let bounds = obj.bounds();
    for seed in 0..20 {
        let x = random_point(4, 1.0, seed);
        let eig = approxnewton::linalg::sym_eigenvalues(&obj.hessian(&x));
        assert!(eig[0] >= bounds.strong_convexity - 1e-10);
        assert!(eig[3] <= bounds.smoothness + 1e-10);
        for i in 0..obj.num_samples() {
            let k = approxnewton::linalg::sym_spectral_norm(&obj.sample_hessian(i, &x));
            assert!(k <= bounds.sample_hessian_bound + 1e-10);
        }
    }
}
