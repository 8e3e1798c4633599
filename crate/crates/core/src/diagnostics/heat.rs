use super::norms::SobolevNorms;
use crate::certificate::CertificateReport;
use crate::error::{Error, Result};
use crate::lagrangian::{EnergyFunctional, LagrangianSpec};
use crate::stencil;
use crate::transport::GridDensity;

/// Default probe time for dissipation quotients, `1e-6 L^2`.
pub fn default_probe(u: &GridDensity) -> f64 {
    1e-6 * u.domain().length().powi(2)
}

/// Heat flow with reflecting walls over diffusion time `s`.
///
/// Crank-Nicolson substeps of length at most `h^2`, which keeps both halves of
/// the scheme nonnegative and doubly stochastic: mass is conserved, positivity
/// is preserved and the entropy does not increase.
pub fn heat_flow(u: &GridDensity, s: f64) -> Result<GridDensity> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!(
            "diffusion time {s} must be finite and nonnegative"
        )));
    }
    if s == 0.0 {
        return Ok(u.clone());
    }
    let h = u.cell_width();
    let m = u.len();
    let substeps = (s / (h * h)).ceil().max(1.0) as usize;
    let r = 0.5 * (s / substeps as f64) / (h * h);
    // (I - r D) u_new = (I + r D) u_old, D the reflected second difference
    // without the 1/h^2 factor. Forward elimination of the constant tridiagonal
    // matrix is done once.
    let diag = |j: usize| {
        if j == 0 || j + 1 == m {
            1.0 + r
        } else {
            1.0 + 2.0 * r
        }
    };
    let mut c = vec![0.0; m];
    let mut denom = vec![0.0; m];
    denom[0] = diag(0);
    c[0] = -r / denom[0];
    for j in 1..m {
        denom[j] = diag(j) + r * c[j - 1];
        c[j] = -r / denom[j];
    }
    let mut v = u.values().to_vec();
    let mut rhs = vec![0.0; m];
    for _ in 0..substeps {
        for j in 0..m {
            let left = if j == 0 { v[0] } else { v[j - 1] };
            let right = if j + 1 == m { v[m - 1] } else { v[j + 1] };
            rhs[j] = v[j] + r * (left - 2.0 * v[j] + right);
        }
        v[0] = rhs[0] / denom[0];
        for j in 1..m {
            v[j] = (rhs[j] + r * v[j - 1]) / denom[j];
        }
        for j in (0..m - 1).rev() {
            v[j] -= c[j] * v[j + 1];
        }
    }
    GridDensity::new(u.domain(), v)
}

/// Difference quotient `(Phi(u) - Phi(S_s u)) / s` along the heat flow.
pub fn flow_interchange_dissipation(
    energy: &EnergyFunctional,
    u: &GridDensity,
    s_probe: f64,
) -> Result<f64> {
    if !(s_probe > 0.0) {
        return Err(Error::Domain("probe time must be positive".into()));
    }
    let flowed = heat_flow(u, s_probe)?;
    Ok((energy.value(u)? - energy.value(&flowed)?) / s_probe)
}

/// Dissipation rate from the quotients at `s` and `s/2` combined by one
/// Richardson step, removing the first-order error in `s`.
pub fn dissipation_rate(energy: &EnergyFunctional, u: &GridDensity, s_probe: f64) -> Result<f64> {
    let coarse = flow_interchange_dissipation(energy, u, s_probe)?;
    let fine = flow_interchange_dissipation(energy, u, 0.5 * s_probe)?;
    Ok(2.0 * fine - coarse)
}

/// Checks `gamma |u''|^2 - C (|u|_{H^1}^2 + 1) <= D Phi(u)` where `D Phi` is the
/// heat-flow dissipation rate and `C = gamma C_3`.
///
/// The extrapolated rate `r(s)` keeps an `O(s^2)` remainder, which a third
/// quotient at `s/4` measures: `r(s) - D Phi ~ 4/3 (r(s) - r(s/2))`. The
/// tolerance is 1.5 times that, plus cancellation in the energy differences.
pub fn check_heat_dissipation(
    spec: &LagrangianSpec,
    u: &GridDensity,
    s_probe: f64,
) -> Result<CertificateReport> {
    let energy = EnergyFunctional::Lagrangian(spec.clone());
    let rate = dissipation_rate(&energy, u, s_probe)?;
    let finer = dissipation_rate(&energy, u, 0.5 * s_probe)?;
    let gamma = spec.constants.gamma;
    let norms = SobolevNorms::of(u);
    let c_tilde = gamma * spec.c3(u.domain().length());
    let lhs = gamma * stencil::hessian_sq_norm(u.values(), u.cell_width())
        - c_tilde * (norms.h1 * norms.h1 + 1.0);
    let remainder = 2.0 * (rate - finer).abs();
    let cancellation = 64.0 * f64::EPSILON * energy.value(u)?.abs() / s_probe;
    let tol = remainder + cancellation + 1e-12 * rate.abs();
    Ok(CertificateReport::new("dispheat", None, lhs, rate, tol)
        .with_note(format!("probe {s_probe:e}, next level {finer:e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{boltzmann_entropy, Interval};
    use std::f64::consts::PI;

    fn mode(m: usize, k: f64, eps: f64) -> GridDensity {
        GridDensity::from_fn(Interval::unit(), m, |x| 1.0 + eps * (k * PI * x).cos()).unwrap()
    }

    fn amplitude(u: &GridDensity, k: f64) -> f64 {
        let h = u.cell_width();
        2.0 * u
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| h * (v - 1.0) * (k * PI * u.midpoint(j)).cos())
            .sum::<f64>()
    }

    #[test]
    fn uniform_and_zero_time_are_fixed() {
        let u = GridDensity::uniform(Interval::new(0.0, 2.0).unwrap(), 32).unwrap();
        let v = heat_flow(&u, 0.3).unwrap();
        for x in v.values() {
            assert!((x - 0.5).abs() < 1e-14);
        }
        let w = mode(32, 2.0, 0.3);
        assert_eq!(heat_flow(&w, 0.0).unwrap(), w);
    }

    #[test]
    fn cosine_modes_decay_at_the_neumann_rate() {
        for k in 1..=4 {
            let k = k as f64;
            let u = mode(256, k, 0.2);
            let s = 1.0 / (k * PI).powi(2);
            let v = heat_flow(&u, s).unwrap();
            let ratio = amplitude(&v, k) / amplitude(&u, k);
            assert!(
                (ratio / (-1.0f64).exp() - 1.0).abs() < 1e-3,
                "k = {k}: {ratio}"
            );
        }
    }

    #[test]
    fn mass_positivity_and_entropy() {
        let mut vals = vec![0.0; 64];
        vals[10] = 20.0;
        vals[40..50].iter_mut().for_each(|v| *v = 3.0);
        let u = GridDensity::normalized(Interval::unit(), vals).unwrap();
        let mut prev = u.clone();
        for _ in 0..20 {
            let next = heat_flow(&prev, 1e-4).unwrap();
            assert!((next.mass() - 1.0).abs() < 1e-12);
            assert!(next.values().iter().all(|v| *v >= 0.0));
            assert!(boltzmann_entropy(&next) <= boltzmann_entropy(&prev) + 1e-15);
            prev = next;
        }
    }

    #[test]
    fn thin_film_rate_matches_eigenmode() {
        let energy = EnergyFunctional::Lagrangian(LagrangianSpec::thin_film());
        for k in [1.0, 3.0] {
            let u = mode(256, k, 0.1);
            let rate = dissipation_rate(&energy, &u, default_probe(&u)).unwrap();
            let exact = 2.0 * (k * PI).powi(2) * energy.value(&u).unwrap();
            assert!((rate / exact - 1.0).abs() < 1e-3, "{rate} vs {exact}");
        }
        let flat = GridDensity::uniform(Interval::unit(), 64).unwrap();
        assert!(
            flow_interchange_dissipation(&energy, &flat, 1e-6)
                .unwrap()
                .abs()
                < 1e-18
        );
    }

    #[test]
    fn heat_dissipation_certificate_passes_for_broadband_data() {
        let spec = LagrangianSpec::thin_film();
        let kinked = GridDensity::from_fn(Interval::unit(), 64, |x| {
            2.0 - 2.0 * x.min(0.5) - (x.max(0.5) - 0.5)
        })
        .unwrap();
        let jagged = GridDensity::from_fn(Interval::unit(), 64, |x| {
            1.0 + 0.3 * (2.0 * PI * x).cos() + 1e-3 * (80.0 * PI * x).cos()
        })
        .unwrap();
        for u in [kinked, jagged] {
            let r = check_heat_dissipation(&spec, &u, default_probe(&u)).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn heat_dissipation_certificate_passes_for_thin_film() {
        let spec = LagrangianSpec::thin_film();
        for eps in [0.05, 0.3] {
            let u = mode(256, 2.0, eps);
            let r = check_heat_dissipation(&spec, &u, default_probe(&u)).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}
