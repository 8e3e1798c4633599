use crate::certificate::CertificateReport;
use crate::error::{Error, Result};
use crate::jko::JkoTrajectory;
use crate::lagrangian::{
    EnergyFunctional, LagrangianSpec, MobilitySpec, TemporalWeight, TestFunction,
};
use crate::transport::GridDensity;
use rayon::prelude::*;

/// Headroom on the right-hand sides of the discrete weak formulations.
pub const WEAK_SLACK_FACTOR: f64 = 2.0;

/// Rounding allowance: the residual sums differences of moments bounded by
/// `|phi|_{C^0} |eta|_{C^0}`.
fn rounding_tolerance(phi: &TestFunction, eta: &TemporalWeight) -> f64 {
    1e-12 * phi.c2_norm() * eta.sup_norm()
}

/// `int u phi` with `u` constant on cells and Simpson's rule for `phi`.
fn moment(u: &GridDensity, phi: &TestFunction) -> f64 {
    let h = u.cell_width();
    u.values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let (a, b) = (u.edge(j), u.edge(j + 1));
            v * h * (phi.value(a) + 4.0 * phi.value(0.5 * (a + b)) + phi.value(b)) / 6.0
        })
        .sum()
}

/// `eta_tau` sampled at the step stamps: entry `n` is `eta(n tau)`.
fn sampled_weight(traj: &JkoTrajectory, eta: &TemporalWeight) -> Result<Vec<f64>> {
    let (t0, t1) = eta.support();
    let horizon = traj.n_steps() as f64 * traj.tau;
    if t0 < 0.0 || t1 > horizon * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "weight support ({t0}, {t1}) leaves the trajectory horizon [0, {horizon}]"
        )));
    }
    Ok((0..=traj.n_steps() + 1)
        .map(|n| eta.eval(n as f64 * traj.tau))
        .collect())
}

/// `sum_{n >= 0} int u^n phi (eta_{n+1} - eta_n) - sum_{n >= 1} tau eta_n int N(u^n, phi)`,
/// the time integral of the discrete weak formulation for piecewise-constant
/// interpolants. The `n = 0` transport term is nonzero whenever `eta(tau) != 0`.
pub fn weak_residual(
    traj: &JkoTrajectory,
    energy: &EnergyFunctional,
    phi: &TestFunction,
    eta: &TemporalWeight,
) -> Result<f64> {
    let w = sampled_weight(traj, eta)?;
    let terms: Vec<f64> = (0..=traj.n_steps())
        .into_par_iter()
        .map(|n| {
            if w[n] == 0.0 && w[n + 1] == 0.0 {
                return Ok(0.0);
            }
            let u = &traj.states[n];
            let transport = moment(u, phi) * (w[n + 1] - w[n]);
            let operator = if n == 0 || w[n] == 0.0 {
                0.0
            } else {
                traj.tau * w[n] * energy.weak_operator(u, phi)?
            };
            Ok(transport - operator)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// `|residual| <= slack tau |phi|_{C^2} |eta|_{C^0} Phi(u^0)`.
pub fn check_discrete_weak_a(
    traj: &JkoTrajectory,
    spec: &LagrangianSpec,
    phi: &TestFunction,
    eta: &TemporalWeight,
    slack_factor: f64,
) -> Result<CertificateReport> {
    let residual = weak_residual(traj, &EnergyFunctional::Lagrangian(spec.clone()), phi, eta)?;
    let bound = slack_factor * traj.tau * phi.c2_norm() * eta.sup_norm() * traj.energies[0];
    Ok(CertificateReport::new(
        "dweak",
        None,
        residual.abs(),
        bound,
        rounding_tolerance(phi, eta),
    )
    .with_note(format!("signed residual {residual:e}, phi {}", phi.name())))
}

/// Sup of `|phi''|` over the cell edges and midpoints of the grid.
pub fn hessian_bound(phi: &TestFunction, u: &GridDensity) -> f64 {
    (0..=2 * u.len())
        .map(|i| u.domain().lo + 0.5 * i as f64 * u.cell_width())
        .map(|x| phi.d2(x).abs())
        .fold(0.0, f64::max)
}

/// The three expressions of the mobility weak formulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakSandwich {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

/// Evaluates the sandwich: with `S = sum_{n >= 0} (|eta|_n - |eta|_{n+1}) E(u^n)` and
/// envelope `slack kappa tau |eta|_{C^0} Phi(u^0)`, it is
/// `-envelope + beta S <= middle <= envelope - beta S`.
pub fn weak_sandwich_f(
    traj: &JkoTrajectory,
    f: &MobilitySpec,
    phi: &TestFunction,
    eta: &TemporalWeight,
    beta: f64,
    slack_factor: f64,
) -> Result<WeakSandwich> {
    if !(beta > 0.0) {
        return Err(Error::Domain("beta must be positive".into()));
    }
    let middle = -weak_residual(traj, &EnergyFunctional::Mobility(f.clone()), phi, eta)?;
    let w = sampled_weight(traj, eta)?;
    let entropy_term: f64 = (0..=traj.n_steps())
        .map(|n| (w[n].abs() - w[n + 1].abs()) * traj.entropies[n])
        .sum();
    let kappa = hessian_bound(phi, &traj.states[0]);
    let envelope = slack_factor * kappa * traj.tau * eta.sup_norm() * traj.energies[0];
    Ok(WeakSandwich {
        lower: -envelope + beta * entropy_term,
        middle,
        upper: envelope - beta * entropy_term,
    })
}

/// Both inequalities of the mobility weak formulation.
pub fn check_discrete_weak_f(
    traj: &JkoTrajectory,
    f: &MobilitySpec,
    phi: &TestFunction,
    eta: &TemporalWeight,
    beta: f64,
    slack_factor: f64,
) -> Result<Vec<CertificateReport>> {
    let s = weak_sandwich_f(traj, f, phi, eta, beta, slack_factor)?;
    let note = format!("beta {beta:e}, phi {}", phi.name());
    let tol = rounding_tolerance(phi, eta);
    Ok(vec![
        CertificateReport::new("dweakf_lower", None, s.lower, s.middle, tol)
            .with_note(note.clone()),
        CertificateReport::new("dweakf_upper", None, s.middle, s.upper, tol).with_note(note),
    ])
}

/// Linear scaling of the weak residual in `tau`: for each pair of runs
/// `(tau, r)` and `(tau', r')` with `tau' < tau`, the observed order
/// `ln(r / r') / ln(tau / tau')` must lie within `ln(factor) / ln(tau / tau')`
/// of one. For halvings that is a ratio in `[2 / factor, 2 factor]`.
pub fn check_weak_scaling(points: &[(f64, f64)], factor: f64) -> Vec<CertificateReport> {
    points
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let ((t0, r0), (t1, r1)) = (w[0], w[1]);
            let step = (t0 / t1).ln();
            let order = (r0.abs() / r1.abs()).ln() / step;
            CertificateReport::new(
                "dweak_scaling",
                Some(i),
                (order - 1.0).abs(),
                factor.ln() / step,
                0.0,
            )
            .with_note(format!("tau {t0:e} -> {t1:e}, residual {r0:e} -> {r1:e}"))
        })
        .collect()
}
