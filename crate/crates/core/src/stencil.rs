//! Finite-difference stencils on a uniform cell-centred grid with reflecting
//! (homogeneous Neumann) boundary conditions.
//!
//! First derivatives live on faces: face `f` sits at `lo + f h` between cells
//! `f - 1` and `f`, for `f = 0..=M`. The two wall faces carry zero slope and
//! half the quadrature weight of an interior face. Second derivatives live on
//! cells and use the reflected three-point stencil.

/// Value, slope and quadrature weight at a face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face {
    pub x: f64,
    pub z: f64,
    pub p: f64,
    pub weight: f64,
}

pub fn faces(lo: f64, h: f64, u: &[f64]) -> impl Iterator<Item = Face> + '_ {
    let m = u.len();
    (0..=m).map(move |f| {
        let x = lo + f as f64 * h;
        if f == 0 {
            Face {
                x,
                z: u[0],
                p: 0.0,
                weight: 0.5 * h,
            }
        } else if f == m {
            Face {
                x,
                z: u[m - 1],
                p: 0.0,
                weight: 0.5 * h,
            }
        } else {
            Face {
                x,
                z: 0.5 * (u[f - 1] + u[f]),
                p: (u[f] - u[f - 1]) / h,
                weight: h,
            }
        }
    })
}

/// Reflected three-point second difference at every cell.
pub fn second_difference(u: &[f64], h: f64, out: &mut [f64]) {
    let m = u.len();
    let inv = 1.0 / (h * h);
    for j in 0..m {
        let left = if j == 0 { u[0] } else { u[j - 1] };
        let right = if j + 1 == m { u[m - 1] } else { u[j + 1] };
        out[j] = (left - 2.0 * u[j] + right) * inv;
    }
}

pub fn second_difference_vec(u: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    second_difference(u, h, &mut out);
    out
}

/// Reflected centred first difference at every cell.
pub fn central_difference(u: &[f64], h: f64) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|j| {
            let left = if j == 0 { u[0] } else { u[j - 1] };
            let right = if j + 1 == m { u[m - 1] } else { u[j + 1] };
            (right - left) / (2.0 * h)
        })
        .collect()
}

/// Discrete `int |u'|^2` over interior faces.
pub fn gradient_sq_norm(u: &[f64], h: f64) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h
}

/// Discrete `int |u''|^2` with the reflected stencil.
pub fn hessian_sq_norm(u: &[f64], h: f64) -> f64 {
    let m = u.len();
    let mut acc = 0.0;
    for j in 0..m {
        let left = if j == 0 { u[0] } else { u[j - 1] };
        let right = if j + 1 == m { u[m - 1] } else { u[j + 1] };
        let d = left - 2.0 * u[j] + right;
        acc += d * d;
    }
    acc / (h * h * h)
}

pub fn l2_sq_norm(u: &[f64], h: f64) -> f64 {
    h * u.iter().map(|v| v * v).sum::<f64>()
}
