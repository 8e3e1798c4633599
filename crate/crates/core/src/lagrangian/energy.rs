use super::{LagrangianSpec, MobilitySpec, TestFunction};
use crate::error::{Error, Result};
use crate::stencil::{self, faces};
use crate::transport::{GridDensity, Interval};

/// Densities below this value are lifted before evaluating `f'`, which may
/// blow up at zero.
pub const MOBILITY_FLOOR: f64 = 1e-12;

/// The driving functional of a run.
#[derive(Clone, Debug)]
pub enum EnergyFunctional {
    /// `int F(x, u, u')`.
    Lagrangian(LagrangianSpec),
    /// `1/2 int |f(u)'|^2`.
    Mobility(MobilitySpec),
}

impl EnergyFunctional {
    pub fn name(&self) -> &str {
        match self {
            Self::Lagrangian(l) => &l.name,
            Self::Mobility(f) => &f.name,
        }
    }

    pub fn value(&self, u: &GridDensity) -> Result<f64> {
        let v = self.evaluate(u.domain(), u.values(), None);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("energy {}", self.name())))
        }
    }

    /// Energy and, optionally, its gradient with respect to the cell values
    /// (scaled so that `grad . du` is the first-order change). Returns
    /// infinity when any contribution is not finite.
    pub fn evaluate(&self, domain: Interval, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let h = domain.length() / u.len() as f64;
        let value = match self {
            Self::Lagrangian(spec) => lagrangian_energy(spec, domain.lo, h, u, grad),
            Self::Mobility(f) => mobility_energy_raw(f, h, u, grad),
        };
        if value.is_finite() {
            value
        } else {
            f64::INFINITY
        }
    }

    /// Tridiagonal Hessian with respect to the cell values: `diag[j]` and
    /// `off[j]` for the pair `(j, j + 1)`.
    pub fn evaluate_hessian(&self, domain: Interval, u: &[f64], diag: &mut [f64], off: &mut [f64]) {
        let m = u.len();
        let h = domain.length() / m as f64;
        diag.iter_mut().for_each(|v| *v = 0.0);
        off.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Self::Lagrangian(spec) => {
                let f = spec.density.as_ref();
                for (k, fc) in faces(domain.lo, h, u).enumerate() {
                    let q = f.hessian(fc.x, fc.z, fc.p);
                    let (zz, zp, pp) = (q[1][1], q[1][2], q[2][2]);
                    if k == 0 || k == m {
                        diag[if k == 0 { 0 } else { m - 1 }] += fc.weight * zz;
                        continue;
                    }
                    // d(z, p)/du_{k-1} = (1/2, -1/h), d(z, p)/du_k = (1/2, 1/h)
                    let quad = |a: (f64, f64), b: (f64, f64)| {
                        a.0 * (zz * b.0 + zp * b.1) + a.1 * (zp * b.0 + pp * b.1)
                    };
                    let (a, b) = ((0.5, -1.0 / h), (0.5, 1.0 / h));
                    diag[k - 1] += fc.weight * quad(a, a);
                    diag[k] += fc.weight * quad(b, b);
                    off[k - 1] += fc.weight * quad(a, b);
                }
            }
            Self::Mobility(f) => {
                let lifted: Vec<f64> = u.iter().map(|z| z.max(MOBILITY_FLOOR)).collect();
                for k in 1..m {
                    let slope = (f.value(u[k]) - f.value(u[k - 1])) / h;
                    let (da, db) = (-f.d1(lifted[k - 1]) / h, f.d1(lifted[k]) / h);
                    diag[k - 1] += h * da * da - slope * f.d2(lifted[k - 1]);
                    diag[k] += h * db * db + slope * f.d2(lifted[k]);
                    off[k - 1] += h * da * db;
                }
            }
        }
    }

    /// `int N(u, phi)` or `int N_f(u, phi)`, so that `d/dt int u phi = -int N`.
    pub fn weak_operator(&self, u: &GridDensity, phi: &TestFunction) -> Result<f64> {
        match self {
            Self::Lagrangian(spec) => weak_operator_n(spec, u, phi),
            Self::Mobility(f) => weak_operator_nf(f, u, phi),
        }
    }

    /// The quantity controlled by the entropy dissipation: `u` itself for a
    /// Lagrangian, `f(u)` for a mobility energy.
    pub fn regularity_profile(&self, u: &GridDensity) -> Vec<f64> {
        match self {
            Self::Lagrangian(_) => u.values().to_vec(),
            Self::Mobility(f) => u.values().iter().map(|&z| f.value(z)).collect(),
        }
    }
}

fn lagrangian_energy(
    spec: &LagrangianSpec,
    lo: f64,
    h: f64,
    u: &[f64],
    grad: Option<&mut [f64]>,
) -> f64 {
    let f = spec.density.as_ref();
    match grad {
        None => faces(lo, h, u)
            .map(|fc| fc.weight * f.value(fc.x, fc.z, fc.p))
            .sum(),
        Some(g) => {
            g.iter_mut().for_each(|v| *v = 0.0);
            let m = u.len();
            let mut total = 0.0;
            for (k, fc) in faces(lo, h, u).enumerate() {
                total += fc.weight * f.value(fc.x, fc.z, fc.p);
                let fz = fc.weight * f.d_z(fc.x, fc.z, fc.p);
                if k == 0 {
                    g[0] += fz;
                } else if k == m {
                    g[m - 1] += fz;
                } else {
                    let fp = fc.weight * f.d_p(fc.x, fc.z, fc.p) / h;
                    g[k - 1] += 0.5 * fz - fp;
                    g[k] += 0.5 * fz + fp;
                }
            }
            total
        }
    }
}

fn mobility_energy_raw(f: &MobilitySpec, h: f64, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let gvals: Vec<f64> = u.iter().map(|&z| f.value(z)).collect();
    let energy = 0.5 * stencil::gradient_sq_norm(&gvals, h);
    if let Some(g) = grad {
        let m = u.len();
        for j in 0..m {
            let left = if j > 0 {
                (gvals[j] - gvals[j - 1]) / h
            } else {
                0.0
            };
            let right = if j + 1 < m {
                (gvals[j + 1] - gvals[j]) / h
            } else {
                0.0
            };
            g[j] = f.d1(u[j].max(MOBILITY_FLOOR)) * (left - right);
        }
    }
    energy
}

/// `int F(x, u, u') dx` with face-centred slopes.
pub fn energy(spec: &LagrangianSpec, u: &GridDensity) -> Result<f64> {
    EnergyFunctional::Lagrangian(spec.clone()).value(u)
}

/// `1/2 int |f(u)'|^2 dx`.
pub fn mobility_energy(f: &MobilitySpec, u: &GridDensity) -> Result<f64> {
    EnergyFunctional::Mobility(f.clone()).value(u)
}

/// `int N(x, u, phi)` with
/// `N = F_x phi' + (F - u F_z) phi'' - F_p (2 u' phi'' + u phi''')`.
pub fn weak_operator_n(spec: &LagrangianSpec, u: &GridDensity, phi: &TestFunction) -> Result<f64> {
    let f = spec.density.as_ref();
    let total: f64 = faces(u.domain().lo, u.cell_width(), u.values())
        .map(|fc| {
            let (x, z, p) = (fc.x, fc.z, fc.p);
            let d2 = phi.d2(x);
            let n = f.d_x(x, z, p) * phi.d1(x) + (f.value(x, z, p) - z * f.d_z(x, z, p)) * d2
                - f.d_p(x, z, p) * (2.0 * p * d2 + z * phi.d3(x));
            fc.weight * n
        })
        .sum();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Evaluation("weak operator N".into()))
    }
}

/// `int N_f(u, phi)` with `N_f = f(u)'' f(u)' phi' + u f'(u) f(u)'' phi''`.
pub fn weak_operator_nf(f: &MobilitySpec, u: &GridDensity, phi: &TestFunction) -> Result<f64> {
    let h = u.cell_width();
    let g: Vec<f64> = u.values().iter().map(|&z| f.value(z)).collect();
    let g1 = stencil::central_difference(&g, h);
    let g2 = stencil::second_difference_vec(&g, h);
    let mut total = 0.0;
    for (j, &z) in u.values().iter().enumerate() {
        let zf = if z > 0.0 {
            z * f.d1(z)
        } else {
            f.zf_limit.ok_or(Error::MobilityDegeneracy)?
        };
        let x = u.midpoint(j);
        total += h * (g2[j] * g1[j] * phi.d1(x) + zf * g2[j] * phi.d2(x));
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Evaluation("weak operator N_f".into()))
    }
}

/// Upper bound for `|int N(x, u, phi)|` from the declared constants:
/// `K (1 + sup u) |phi|_{C^3} (L + int |u'|^2)` with
/// `K = max(3D + C + 1, sqrt D)`.
///
/// The `u phi'''` term of `N` is why the third derivative and `sup u` enter.
pub fn weak_operator_bound(spec: &LagrangianSpec, u: &GridDensity, phi: &TestFunction) -> f64 {
    let LagrangianSpec { constants: k, .. } = spec;
    let kk = (3.0 * k.d_bound + k.c_upper + 1.0).max(k.d_bound.sqrt());
    let sup_u = u.values().iter().cloned().fold(0.0, f64::max);
    let grad = stencil::gradient_sq_norm(u.values(), u.cell_width());
    kk * (1.0 + sup_u) * phi.c3_norm() * (u.domain().length() + grad)
}
