use super::TransportMap;
use crate::certificate::CertificateReport;
use crate::error::{Error, Result};
use crate::lagrangian::TestFunction;

/// Relative tolerance of the finite-difference volume-distortion identities.
pub const VOLUME_DISTORTION_TOLERANCE: f64 = 1e-5;

fn rk4(phi: &TestFunction, y: f64, s: f64) -> f64 {
    let k1 = phi.d1(y);
    let k2 = phi.d1(y + 0.5 * s * k1);
    let k3 = phi.d1(y + 0.5 * s * k2);
    let k4 = phi.d1(y + s * k3);
    y + s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Moves every node along the flow of `phi'` for time `s` (one RK4 step).
pub fn perturbation_flow(map: &TransportMap, phi: &TestFunction, s: f64) -> Result<TransportMap> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("flow time {s} is not finite")));
    }
    let domain = map.domain();
    let slop = 1e-12 * domain.length();
    let mut positions = Vec::with_capacity(map.positions().len());
    for (i, &y) in map.positions().iter().enumerate() {
        let x = rk4(phi, y, s);
        if x < domain.lo - slop || x > domain.hi + slop {
            return Err(Error::StepTooLarge(format!(
                "node {i} leaves the domain (x = {x})"
            )));
        }
        positions.push(x.clamp(domain.lo, domain.hi));
    }
    TransportMap::new(domain, map.masses().to_vec(), positions).map_err(|e| match e {
        Error::Monotonicity { index, gap, .. } => Error::StepTooLarge(format!(
            "nodes {index} and {} collide (gap {gap:e})",
            index + 1
        )),
        other => other,
    })
}

/// Checks, at every node `y` of `map`, the first-order identities of the
/// volume distortion `V_s = dX_s/dy` of the perturbation flow:
///
/// * `d/ds V_s = phi''(y)` at `s = 0`,
/// * `d/ds [u'/V_s^2 - u V_s'/V_s^3] = -2 u' phi'' - u phi'''` at `s = 0`,
///
/// where `u` and `u'` are the density and its slope at the node. Derivatives
/// in `y` use fourth-order differences; derivatives in `s` are centred
/// quotients with one Richardson extrapolation step. One
/// pair of reports is produced per entry of `s_values`, each carrying the
/// sup-norm error relative to `max(sup |rhs|, 1)`.
pub fn volume_distortion_check(
    map: &TransportMap,
    phi: &TestFunction,
    s_values: &[f64],
) -> Result<Vec<CertificateReport>> {
    if s_values.is_empty() || s_values.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Domain("flow times must be positive".into()));
    }
    let x = map.positions();
    let rho = map.node_density();
    let n = x.len();
    let slope: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (rho[b] - rho[a]) / (x[b] - x[a])
        })
        .collect();
    let delta = 2e-3 * map.domain().length();

    let distortion = |y: f64, s: f64| {
        let p = |k: f64| rk4(phi, y + k * delta, s);
        let (m2, m1, c, p1, p2) = (p(-2.0), p(-1.0), p(0.0), p(1.0), p(2.0));
        let v = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * delta);
        let dv = (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * delta * delta);
        (v, dv)
    };

    let mut reports = Vec::with_capacity(2 * s_values.len());
    for &s in s_values {
        let (mut err_v, mut scale_v, mut err_g, mut scale_g) = (0.0f64, 1.0f64, 0.0f64, 1.0f64);
        for i in 0..n {
            let y = x[i];
            let g = |v: f64, dv: f64| slope[i] / (v * v) - rho[i] * dv / (v * v * v);
            let central = |s: f64| {
                let (vp, dvp) = distortion(y, s);
                let (vm, dvm) = distortion(y, -s);
                ((vp - vm) / (2.0 * s), (g(vp, dvp) - g(vm, dvm)) / (2.0 * s))
            };
            // Richardson step removes the O(s^2) term of the centred quotient
            let (full, half) = (central(s), central(0.5 * s));
            let fd_v = (4.0 * half.0 - full.0) / 3.0;
            let fd_g = (4.0 * half.1 - full.1) / 3.0;
            let exact_v = phi.d2(y);
            let exact_g = -2.0 * slope[i] * phi.d2(y) - rho[i] * phi.d3(y);
            err_v = err_v.max((fd_v - exact_v).abs());
            err_g = err_g.max((fd_g - exact_g).abs());
            scale_v = scale_v.max(exact_v.abs());
            scale_g = scale_g.max(exact_g.abs());
        }
        let note = format!("s = {s:e}");
        reports.push(
            CertificateReport::new(
                "vsprops_volume",
                None,
                err_v / scale_v,
                VOLUME_DISTORTION_TOLERANCE,
                0.0,
            )
            .with_note(note.clone()),
        );
        reports.push(
            CertificateReport::new(
                "vsprops_gradient",
                None,
                err_g / scale_g,
                VOLUME_DISTORTION_TOLERANCE,
                0.0,
            )
            .with_note(note),
        );
    }
    Ok(reports)
}
