use nalgebra::{DMatrix, DVector};

use super::FiniteSumObjective;

/// Relative errors of the analytic derivatives against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeErrors {
    pub gradient: f64,
    pub hessian: f64,
}

/// Central differences of `value` (for the gradient) and of `gradient` (for
/// the Hessian) at `x` with step `h`. Errors are `‖fd − analytic‖ / max(‖analytic‖, 1)`.
pub fn check_derivatives<O: FiniteSumObjective + ?Sized>(
    obj: &O,
    x: &DVector<f64>,
    h: f64,
) -> DerivativeErrors {
    let d = obj.dim();
    let mut fd_grad = DVector::zeros(d);
    let mut fd_hess = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += h;
        down[j] -= h;
        fd_grad[j] = (obj.value(&up) - obj.value(&down)) / (2.0 * h);
        let col = (obj.gradient(&up) - obj.gradient(&down)) / (2.0 * h);
        fd_hess.set_column(j, &col);
    }
    let g = obj.gradient(x);
    let hm = obj.hessian(x);
    DerivativeErrors {
        gradient: (&fd_grad - &g).norm() / g.norm().max(1.0),
        hessian: (&fd_hess - &hm).norm() / hm.norm().max(1.0),
    }
}
