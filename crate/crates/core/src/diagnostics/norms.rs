use crate::stencil;
use crate::transport::{GridDensity, Interval};
use serde::Serialize;

/// Discrete Sobolev norms of a grid function, using the same stencils as the
/// energies: face slopes for the gradient and the reflected second difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SobolevNorms {
    pub l2: f64,
    /// `|v'|_{L^2}`.
    pub grad: f64,
    /// `|v''|_{L^2}`.
    pub hess: f64,
    pub h1: f64,
    pub h2: f64,
}

impl SobolevNorms {
    pub fn of_values(domain: Interval, v: &[f64]) -> Self {
        let h = domain.length() / v.len() as f64;
        let l2 = stencil::l2_sq_norm(v, h);
        let grad = stencil::gradient_sq_norm(v, h);
        let hess = stencil::hessian_sq_norm(v, h);
        Self {
            l2: l2.sqrt(),
            grad: grad.sqrt(),
            hess: hess.sqrt(),
            h1: (l2 + grad).sqrt(),
            h2: (l2 + grad + hess).sqrt(),
        }
    }

    pub fn of(u: &GridDensity) -> Self {
        Self::of_values(u.domain(), u.values())
    }
}

/// Sharp Poincare constant `P` with `|v - mean v| <= P |v'|` for grid functions
/// on `m` cells: the inverse square root of the smallest nonzero eigenvalue of
/// the reflected Laplacian. It exceeds the continuum value `L / pi` by a
/// relative `O(h^2)`.
pub fn poincare_constant(domain: Interval, m: usize) -> f64 {
    let h = domain.length() / m as f64;
    let half_angle = std::f64::consts::PI * h / (2.0 * domain.length());
    h / (2.0 * half_angle.sin())
}

/// Bound on `|v''|^2` produced by rounding alone when `v` is a pushed-forward
/// density on `m` cells: edge CDF values carry an absolute error of a few
/// ulps, which the second difference amplifies by `h^-3`. `gain` bounds
/// `|dv/du|` when `v` is a function of the density.
pub fn hessian_roundoff_floor(domain: Interval, m: usize, gain: f64) -> f64 {
    let h = domain.length() / m as f64;
    let du = 2.0 * f64::EPSILON / h;
    let dv2 = 4.0 * gain * du / (h * h);
    domain.length() * dv2 * dv2
}
