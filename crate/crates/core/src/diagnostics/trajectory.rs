use super::norms::{hessian_roundoff_floor, poincare_constant, SobolevNorms};
use crate::certificate::CertificateReport;
use crate::error::Result;
use crate::jko::JkoTrajectory;
use crate::lagrangian::{dissipation_constants, EnergyFunctional, LagrangianSpec, MobilitySpec};
use crate::stencil;
use crate::transport::QuantileProfile;
use rayon::prelude::*;

/// Relative slack granted to the per-step dissipation certificates.
pub const DISSIPATION_SLACK: f64 = 0.1;

/// `Phi(u^n) <= Phi(u^m) + inner_tol |Phi(u^0)|` for all `m <= n`, one
/// report per step against the running minimum.
pub fn check_energy_monotone(traj: &JkoTrajectory) -> Vec<CertificateReport> {
    let tol = traj.inner_tol * traj.energies[0].abs();
    let mut best = traj.energies[0];
    let mut out = Vec::with_capacity(traj.n_steps());
    for n in 1..=traj.n_steps() {
        let e = traj.energies[n];
        out.push(CertificateReport::new("supE", Some(n), e, best, tol));
        best = best.min(e);
    }
    out
}

/// `sum_n W2(u^{n-1}, u^n)^2 <= 2 tau Phi(u^0) factor`.
pub fn check_total_square_distance(traj: &JkoTrajectory, factor: f64) -> CertificateReport {
    let total: f64 = traj.step_distances.iter().map(|d| d * d).sum();
    let bound = 2.0 * traj.tau * traj.energies[0] * factor;
    CertificateReport::new("sumw2", None, total, bound, 0.0).with_note(format!("factor {factor}"))
}

/// `W2(u(t), u(s)) <= sqrt(2 Phi(u^0) (|t - s| + tau))` over all pairs of
/// recorded stamps; one report per stamp with its worst earlier partner.
pub fn check_holder(traj: &JkoTrajectory) -> Result<Vec<CertificateReport>> {
    let profiles: Vec<QuantileProfile> = traj.states.par_iter().map(QuantileProfile::new).collect();
    let phi0 = traj.energies[0].max(0.0);
    (1..=traj.n_steps())
        .into_par_iter()
        .map(|n| {
            let mut worst: Option<(f64, f64, usize)> = None;
            for m in 0..n {
                let d = profiles[n].distance(&profiles[m])?;
                let bound = (2.0 * phi0 * ((n - m) as f64 * traj.tau + traj.tau)).sqrt();
                if worst.is_none_or(|(wd, wb, _)| bound - d < wb - wd) {
                    worst = Some((d, bound, m));
                }
            }
            let (d, bound, m) = worst.expect("at least one earlier stamp");
            Ok(CertificateReport::new("w2cont", Some(n), d, bound, 0.0)
                .with_note(format!("partner stamp {m}")))
        })
        .collect()
}

/// The objective at the returned state does not exceed its value at the
/// previous state.
pub fn check_minimality(traj: &JkoTrajectory) -> Vec<CertificateReport> {
    traj.steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let note = if s.converged {
                ""
            } else {
                "inner solver did not converge"
            };
            CertificateReport::new(
                "minimality",
                Some(i + 1),
                s.objective_end,
                s.objective_start,
                0.0,
            )
            .with_note(note)
        })
        .collect()
}

/// Shared shape of the two entropy-dissipation certificates:
/// `|v^n''|^2 <= (E(u^{n-1}) - E(u^n)) / (c tau) + extra_n`, with `v = u`
/// or `v = f(u)`.
fn dissipation_reports(
    traj: &JkoTrajectory,
    name: &str,
    c: f64,
    profile: impl Fn(&[f64]) -> (Vec<f64>, f64) + Sync,
    extra: impl Fn(usize) -> f64 + Sync,
) -> Vec<CertificateReport> {
    let domain = traj.domain();
    (1..=traj.n_steps())
        .into_par_iter()
        .map(|n| {
            let u = &traj.states[n];
            let (v, gain) = profile(u.values());
            let lhs = stencil::hessian_sq_norm(&v, u.cell_width());
            let drop = (traj.entropies[n - 1] - traj.entropies[n]) / (c * traj.tau);
            let rhs = drop + extra(n);
            let inexact = traj.inner_tol * traj.energies[n - 1].abs() / (c * traj.tau);
            let floor = hessian_roundoff_floor(domain, u.len(), gain);
            let tol = DISSIPATION_SLACK * drop.abs() + inexact + floor;
            CertificateReport::new(name, Some(n), lhs, rhs, tol)
        })
        .collect()
}

/// `|u^n''|^2 <= (E(u^{n-1}) - E(u^n)) / (gamma tau) + C_3 (|u^n|_{H^1}^2 + 1)`
/// for every step, with `C_3 = 0` when `F` does not depend on `x`.
pub fn check_entropy_dissipation_a(
    traj: &JkoTrajectory,
    spec: &LagrangianSpec,
) -> Vec<CertificateReport> {
    let domain = traj.domain();
    let c3 = spec.c3(domain.length());
    dissipation_reports(
        traj,
        "addreg",
        spec.constants.gamma,
        |u| (u.to_vec(), 1.0),
        |n| {
            if c3 == 0.0 {
                0.0
            } else {
                let h1 = SobolevNorms::of(&traj.states[n]).h1;
                c3 * (h1 * h1 + 1.0)
            }
        },
    )
}

/// `|f(u^n)''|^2 <= (E(u^{n-1}) - E(u^n)) / (delta tau)` for every step.
pub fn check_entropy_dissipation_f(
    traj: &JkoTrajectory,
    f: &MobilitySpec,
    delta: f64,
) -> Vec<CertificateReport> {
    dissipation_reports(
        traj,
        "addregf",
        delta,
        |u| {
            let v = u.iter().map(|&z| f.value(z)).collect();
            let gain = u
                .iter()
                .map(|&z| f.d1(z.max(crate::lagrangian::MOBILITY_FLOOR)))
                .fold(0.0, f64::max);
            (v, gain)
        },
        |_| 0.0,
    )
}

/// `sup_z f(z) / (z + 1)` on a logarithmic sample.
fn linear_growth(f: &MobilitySpec) -> f64 {
    (0..=2000)
        .map(|i| 10f64.powf(-10.0 + 14.0 * i as f64 / 2000.0))
        .map(|z| f.value(z) / (z + 1.0))
        .fold(0.0, f64::max)
}

/// A priori bounds: the supremum in time of the `H^1` norm of `u` (or `f(u)`)
/// against the coercivity bound, and the time-integrated squared `H^2` norm
/// against the sum of the per-step dissipation estimates.
pub fn apriori_bounds(
    traj: &JkoTrajectory,
    energy: &EnergyFunctional,
) -> Result<Vec<CertificateReport>> {
    let domain = traj.domain();
    let length = domain.length();
    let m = traj.states[0].len();
    let p2 = poincare_constant(domain, m).powi(2);
    let phi0 = traj.energies[0];
    let profiles: Vec<Vec<f64>> = traj
        .states
        .par_iter()
        .map(|u| energy.regularity_profile(u))
        .collect();
    let norms: Vec<SobolevNorms> = profiles
        .iter()
        .map(|v| SobolevNorms::of_values(domain, v))
        .collect();
    let sup_h1 = norms.iter().map(|n| n.h1).fold(0.0, f64::max);
    let (h1_bound, c, extra_c3, gain) = match energy {
        EnergyFunctional::Lagrangian(spec) => {
            // Phi >= c |u'|^2 and |u - 1/L|^2 <= P^2 |u'|^2 give
            // Phi >= C0 |u|_{H^1}^2 - C1 with C0 = c / (1 + P^2), C1 = C0 / L.
            let c0 = spec.constants.c_lower / (1.0 + p2);
            let c1 = c0 / length;
            (
                ((phi0 + c1) / c0).sqrt(),
                spec.constants.gamma,
                spec.c3(length),
                1.0,
            )
        }
        EnergyFunctional::Mobility(f) => {
            // |f(u)'|^2 = 2 Phi and mean f(u) <= C (1 + L) / L.
            let growth = linear_growth(f);
            let bound = (2.0 * phi0 * (1.0 + p2)
                + growth * growth * (1.0 + length).powi(2) / length)
                .sqrt();
            let (_, delta) = dissipation_constants(f, 1)?;
            let gain = traj
                .states
                .iter()
                .flat_map(|u| u.values().iter())
                .map(|&z| f.d1(z.max(crate::lagrangian::MOBILITY_FLOOR)))
                .fold(0.0, f64::max);
            (bound, delta, 0.0, gain)
        }
    };
    let h1_report = CertificateReport::new("apriori_h1", None, sup_h1, h1_bound, 1e-12 * h1_bound)
        .with_note("sup over stamps of the H1 norm against the coercivity bound");

    let n = traj.n_steps();
    let horizon = n as f64 * traj.tau;
    let integral: f64 = (1..=n).map(|k| traj.tau * norms[k].h2 * norms[k].h2).sum();
    let drop = (traj.entropies[0] - traj.entropies[n]) / c;
    let c3_term: f64 = (1..=n)
        .map(|k| extra_c3 * traj.tau * (norms[k].h1 * norms[k].h1 + 1.0))
        .sum();
    let rhs = horizon * sup_h1 * sup_h1 + drop + c3_term;
    let inexact: f64 = (0..n)
        .map(|k| traj.inner_tol * traj.energies[k].abs() / c)
        .sum();
    let floor = n as f64 * traj.tau * hessian_roundoff_floor(domain, m, gain);
    // the stationary case makes both sides equal up to summation order
    let tol = DISSIPATION_SLACK * drop.abs() + inexact + floor + 1e-12 * rhs.abs();
    let h2_report = CertificateReport::new("apriori_h2", None, integral, rhs, tol)
        .with_note(format!("sup H1 norm {sup_h1:e}"));
    Ok(vec![h1_report, h2_report])
}
