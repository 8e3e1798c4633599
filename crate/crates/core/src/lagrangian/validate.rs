use super::{LagrangianSpec, MobilitySpec};
use crate::certificate::CertificateReport;
use crate::error::{Error, Result};
use crate::transport::Interval;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quasi-random sampling box for Lagrangian checks.
#[derive(Clone, Debug)]
pub struct SamplingPlan {
    pub x: (f64, f64),
    pub z: (f64, f64),
    pub p: (f64, f64),
    pub points: usize,
    pub directions: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn for_domain(domain: Interval) -> Self {
        Self {
            x: (domain.lo, domain.hi),
            z: (1e-3, 10.0),
            p: (-50.0, 50.0),
            points: 10_000,
            directions: 4,
            seed: 0,
        }
    }
}

/// Log-spaced sampling of `(z_min, z_max]` for mobility checks.
#[derive(Clone, Debug)]
pub struct MobilitySamplingPlan {
    pub z_min: f64,
    pub z_max: f64,
    pub points: usize,
}

impl Default for MobilitySamplingPlan {
    fn default() -> Self {
        Self {
            z_min: 1e-10,
            z_max: 1e4,
            points: 2000,
        }
    }
}

fn halton(mut i: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn lerp(range: (f64, f64), t: f64) -> f64 {
    range.0 + (range.1 - range.0) * t
}

/// Infimum of `v^T H v` over `v = (xi, zeta, 1)`: minimizes the quadratic in
/// `(xi, zeta)` through the eigenpairs of the leading 2x2 block.
fn schur_infimum(h: &[[f64; 3]; 3]) -> f64 {
    let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
    let (bx, bz) = (h[0][2], h[1][2]);
    let scale = h
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let eig = [mean - rad, mean + rad];
    let mut value = h[2][2];
    for &lambda in &eig {
        // eigenvector of [[a, b], [b, c]] for lambda
        let (mut ex, mut ez) = if b.abs() > tol {
            (b, lambda - a)
        } else if (lambda - a).abs() <= (lambda - c).abs() {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let norm = (ex * ex + ez * ez).sqrt();
        ex /= norm;
        ez /= norm;
        let proj = ex * bx + ez * bz;
        if lambda > tol {
            value -= proj * proj / lambda;
        } else if lambda < -tol || proj.abs() > tol {
            return f64::NEG_INFINITY;
        }
    }
    value
}

/// Samples the structural conditions on `F`: radial symmetry and
/// monotonicity in `p`, the Hessian lower bound `D^2F[v, v] >= gamma pi^2`,
/// and the growth bounds with the declared `c`, `C`, `D`.
pub fn validate_assumption_a(spec: &LagrangianSpec, plan: &SamplingPlan) -> Vec<CertificateReport> {
    let f = spec.density.as_ref();
    let k = spec.constants;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut symmetry = 0.0f64;
    let mut monotone = 0.0f64;
    let mut gamma_obs = f64::INFINITY;
    let mut bounds = [f64::NEG_INFINITY; 6];
    for i in 1..=plan.points {
        let x = lerp(plan.x, halton(i, 2));
        let z = lerp(plan.z, halton(i, 3));
        let p = lerp(plan.p, halton(i, 5));
        let v = f.value(x, z, p);
        let w = 1.0 + p * p;
        symmetry = symmetry.max((v - f.value(x, z, -p)).abs() / (1.0 + v.abs()));
        monotone = monotone.max(-p * f.d_p(x, z, p) / w);

        let hess = f.hessian(x, z, p);
        gamma_obs = gamma_obs.min(schur_infimum(&hess));
        for _ in 0..plan.directions {
            let d: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            if d[2].abs() < 1e-3 {
                continue;
            }
            let mut q = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    q += d[a] * hess[a][b] * d[b];
                }
            }
            gamma_obs = gamma_obs.min(q / (d[2] * d[2]));
        }

        let fp = f.d_p(x, z, p);
        let checks = [
            k.c_lower * p * p - v,
            v - k.c_upper * w,
            f.d_x(x, z, p).abs() - k.d_bound * w,
            hess[0][0] - k.d_bound * w,
            z * f.d_z(x, z, p).abs() - k.d_bound * w,
            fp * fp - k.d_bound * w,
        ];
        for (b, c) in bounds.iter_mut().zip(checks) {
            *b = b.max(c / w);
        }
    }
    let tol = 1e-9
        * [1.0, k.c_upper, k.d_bound]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
    let mut out = vec![
        CertificateReport::new("A_radial_symmetry", None, symmetry, 0.0, 1e-12),
        CertificateReport::new("A_radial_monotone", None, monotone, 0.0, tol),
        CertificateReport::new(
            "A_convexity",
            None,
            k.gamma,
            gamma_obs,
            1e-9 * k.gamma.max(1.0),
        )
        .with_note("lhs: declared gamma, rhs: sampled infimum of D^2F[v,v]/pi^2"),
    ];
    let names = [
        "A_lower_bound",
        "A_upper_bound",
        "A_fx_bound",
        "A_fxx_trace_bound",
        "A_zfz_bound",
        "A_fp_bound",
    ];
    for (name, b) in names.iter().zip(bounds) {
        out.push(
            CertificateReport::new(*name, None, b, 0.0, tol)
                .with_note("worst (lhs - rhs) / (p^2 + 1)"),
        );
    }
    out
}

/// Right-hand side `delta_bar + 1 - d/2 + sqrt(d^2 + 8d)/2` of the ratio condition.
pub fn ratio_requirement(d: usize, delta_bar: f64) -> f64 {
    let d = d as f64;
    delta_bar + 1.0 - 0.5 * d + 0.5 * (d * d + 8.0 * d).sqrt()
}

/// Aitken extrapolation of the last three entries of a sequence.
fn extrapolate(seq: &[f64]) -> f64 {
    let n = seq.len();
    let (a, b, c) = (seq[n - 3], seq[n - 2], seq[n - 1]);
    let denom = (c - b) - (b - a);
    if denom.abs() <= f64::EPSILON * (a.abs() + b.abs() + c.abs()) {
        c
    } else {
        c - (c - b) * (c - b) / denom
    }
}

/// Samples the conditions on the mobility `f` for space dimension `d`.
pub fn validate_assumption_f(
    f: &MobilitySpec,
    d: usize,
    plan: &MobilitySamplingPlan,
) -> Result<Vec<CertificateReport>> {
    if d < 1 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !(plan.z_min > 0.0 && plan.z_max > plan.z_min && plan.points >= 2) {
        return Err(Error::Domain(
            "mobility sampling needs 0 < z_min < z_max".into(),
        ));
    }
    let (lmin, lmax) = (plan.z_min.ln(), plan.z_max.ln());
    let zs: Vec<f64> = (0..plan.points)
        .map(|i| (lmin + (lmax - lmin) * i as f64 / (plan.points - 1) as f64).exp())
        .collect();

    let mut concavity = f64::NEG_INFINITY;
    let mut derivative_bound = f64::NEG_INFINITY;
    let mut ratio_margin = f64::INFINITY;
    let mut lemma_a = f64::NEG_INFINITY;
    let (mut c0, mut c1) = (0.0f64, 0.0f64);
    let required = ratio_requirement(d, f.delta_bar);
    for &z in &zs {
        let (v, d1, d2, d3) = (f.value(z), f.d1(z), f.d2(z), f.d3(z));
        concavity = concavity.max(z * d2 / d1.abs().max(f64::MIN_POSITIVE));
        derivative_bound = derivative_bound.max(1.0 - d1 / (f.c_lower * z.powf(f.alpha - 1.0)));
        ratio_margin = ratio_margin.min(d3 * d1 / (d2 * d2) - required);
        lemma_a = lemma_a.max((f.c_lower / f.alpha * z.powf(f.alpha) - v) / (1.0 + v.abs()));
        c0 = c0.max(v / (z + 1.0));
        c1 = c1.max(z * d1 / (v + 1.0));
    }
    if ratio_margin.is_nan() {
        ratio_margin = f64::NEG_INFINITY;
    }

    let decades: Vec<f64> = (2..=14).map(|k| 10f64.powi(-k)).collect();
    let f_seq: Vec<f64> = decades.iter().map(|&z| f.value(z)).collect();
    let zf_seq: Vec<f64> = decades.iter().map(|&z| z * f.d1(z)).collect();
    let f_limit = extrapolate(&f_seq);
    let zf_tail: Vec<f64> = zf_seq.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let zf_scale = 1.0 + zf_seq.iter().map(|v| v.abs()).fold(0.0, f64::max);
    // successive differences must shrink, or already be negligible
    let zf_contracting = zf_tail
        .windows(2)
        .skip(zf_tail.len().saturating_sub(4))
        .map(|w| {
            if w[0] <= 1e-13 * zf_scale {
                0.0
            } else {
                w[1] / w[0]
            }
        })
        .fold(0.0, f64::max);

    let (lo, _) = alpha_window(d)?;
    let floor = (0.5 - 1.0 / d as f64).max(0.0);
    let rel = 1e-9;
    Ok(vec![
        CertificateReport::new(
            "f_zero_limit",
            None,
            f_limit.abs(),
            0.0,
            1e-8 * (1.0 + f.value(1.0).abs()),
        )
        .with_note("extrapolated f(0+)"),
        CertificateReport::new("f_concavity", None, concavity, -1e-12, 0.0)
            .with_note("max z f''/|f'| must be negative"),
        CertificateReport::new("f_derivative_lower_bound", None, derivative_bound, 0.0, rel)
            .with_note("max 1 - f'/(C z^(alpha-1))"),
        CertificateReport::new("f_alpha_assumption", None, floor + 1e-12, f.alpha, 0.0)
            .with_note("alpha must exceed [1/2 - 1/d]_+ and stay below 1"),
        CertificateReport::new("f_alpha_below_one", None, f.alpha, 1.0 - 1e-12, 0.0),
        CertificateReport::new("f_alpha_window", None, lo + 1e-12, f.alpha, 0.0)
            .with_note("power-function window 3/4 - sqrt(1 + 8/d)/4 < alpha"),
        CertificateReport::new("f_zf_limit_exists", None, zf_contracting, 1.0 - 1e-6, 0.0)
            .with_note(format!(
                "z f'(z) at z = 1e-14: {:e}",
                zf_seq[zf_seq.len() - 1]
            )),
        CertificateReport::new(
            "f_ratio_condition",
            None,
            0.0,
            ratio_margin,
            rel * required.abs().max(1.0),
        )
        .with_note(format!("f'''f'/f''^2 - {required}")),
        CertificateReport::new("f_lower_power_bound", None, lemma_a, 0.0, rel)
            .with_note("f >= (C/alpha) z^alpha"),
        CertificateReport::new("f_linear_growth", None, c0, f64::MAX, 0.0)
            .with_note(format!("observed C0 = sup f/(z+1) = {c0}")),
        CertificateReport::new("f_zf_growth", None, c1, f64::MAX, 0.0)
            .with_note(format!("observed C1 = sup z f'/(f+1) = {c1}")),
    ])
}

/// Admissible exponents `(alpha_min, 1]` for power mobilities in dimension `d`.
pub fn alpha_window(d: usize) -> Result<(f64, f64)> {
    if d < 1 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let d = d as f64;
    Ok((0.75 - 0.25 * (1.0 + 8.0 / d).sqrt(), 1.0))
}

/// `chi = sqrt(d / (d + 8))` and half of the largest `delta in (0, 1]` with
/// `delta_bar - delta (delta_bar - 1 - d/2 + sqrt(d^2 + 8d)/2) >= 0`.
pub fn dissipation_constants(f: &MobilitySpec, d: usize) -> Result<(f64, f64)> {
    if d < 1 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !(f.delta_bar > 0.0) {
        return Err(Error::InvalidMobility(format!(
            "delta_bar = {} must be positive",
            f.delta_bar
        )));
    }
    let df = d as f64;
    let chi = (df / (df + 8.0)).sqrt();
    let bracket = ratio_requirement(d, f.delta_bar) - 2.0;
    let delta_max = if bracket > 0.0 {
        (f.delta_bar / bracket).min(1.0)
    } else {
        1.0
    };
    Ok((chi, 0.5 * delta_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::all_pass;
    use crate::lagrangian::{Lagrangian, LagrangianConstants};
    use std::sync::Arc;

    fn small_plan() -> SamplingPlan {
        SamplingPlan {
            points: 2000,
            ..SamplingPlan::for_domain(Interval::unit())
        }
    }

    #[test]
    fn thin_film_passes_with_unit_convexity() {
        let r = validate_assumption_a(&LagrangianSpec::thin_film(), &small_plan());
        assert!(all_pass(&r), "{r:#?}");
        let conv = r.iter().find(|c| c.name == "A_convexity").unwrap();
        assert!((conv.rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_lagrangian_fails_convexity() {
        let k = LagrangianConstants {
            gamma: 0.1,
            c_lower: 0.0,
            c_upper: 1e9,
            d_bound: 1e9,
        };
        let spec = LagrangianSpec::from_mobility(&MobilitySpec::sqrt(), k);
        let r = validate_assumption_a(&spec, &small_plan());
        let conv = r.iter().find(|c| c.name == "A_convexity").unwrap();
        assert!(!conv.pass);
        assert!(conv.rhs.abs() < 1e-6);
    }

    struct QuadraticPlusZ2;
    impl Lagrangian for QuadraticPlusZ2 {
        fn value(&self, _: f64, z: f64, p: f64) -> f64 {
            0.5 * p * p + z * z
        }
        fn d_x(&self, _: f64, _: f64, _: f64) -> f64 {
            0.0
        }
        fn d_z(&self, _: f64, z: f64, _: f64) -> f64 {
            2.0 * z
        }
        fn d_p(&self, _: f64, _: f64, p: f64) -> f64 {
            p
        }
        fn hessian(&self, _: f64, _: f64, _: f64) -> [[f64; 3]; 3] {
            [[0.0; 3], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]
        }
    }

    #[test]
    fn growth_in_z_violates_upper_bound() {
        let spec = LagrangianSpec::new(
            "quadratic_plus_z2",
            Arc::new(QuadraticPlusZ2),
            LagrangianConstants {
                gamma: 1.0,
                c_lower: 0.5,
                c_upper: 0.5,
                d_bound: 1.0,
            },
            false,
        );
        let r = validate_assumption_a(&spec, &small_plan());
        assert!(!r.iter().find(|c| c.name == "A_upper_bound").unwrap().pass);
        assert!(r.iter().find(|c| c.name == "A_convexity").unwrap().pass);
    }

    #[test]
    fn schur_infimum_cases() {
        assert_eq!(schur_infimum(&[[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]]), 1.0);
        let h = [[2.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]];
        assert!((schur_infimum(&h) - 0.5).abs() < 1e-15);
        let h = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]];
        assert_eq!(schur_infimum(&h), f64::NEG_INFINITY);
    }

    fn report<'a>(r: &'a [CertificateReport], name: &str) -> &'a CertificateReport {
        r.iter().find(|c| c.name == name).unwrap()
    }

    #[test]
    fn sqrt_mobility_is_admissible_in_one_dimension() {
        let r = validate_assumption_f(&MobilitySpec::sqrt(), 1, &MobilitySamplingPlan::default())
            .unwrap();
        assert!(all_pass(&r), "{r:#?}");
        assert!(report(&r, "f_ratio_condition").rhs.abs() < 1e-9);
    }

    #[test]
    fn sqrt_mobility_fails_with_larger_margin() {
        let mut f = MobilitySpec::sqrt();
        f.delta_bar = 1.01;
        let r = validate_assumption_f(&f, 1, &MobilitySamplingPlan::default()).unwrap();
        assert!(!report(&r, "f_ratio_condition").pass);
    }

    #[test]
    fn identity_fails_concavity() {
        let r = validate_assumption_f(
            &MobilitySpec::identity(),
            1,
            &MobilitySamplingPlan::default(),
        )
        .unwrap();
        assert!(!report(&r, "f_concavity").pass);
    }

    #[test]
    fn small_exponent_fails_window_in_two_dimensions() {
        let r = validate_assumption_f(
            &MobilitySpec::power(1.0, 0.1),
            2,
            &MobilitySamplingPlan::default(),
        )
        .unwrap();
        assert!(!report(&r, "f_alpha_window").pass);
        let r1 = validate_assumption_f(
            &MobilitySpec::power(1.0, 0.1),
            1,
            &MobilitySamplingPlan::default(),
        )
        .unwrap();
        assert!(report(&r1, "f_alpha_window").pass);
    }

    #[test]
    fn window_edge_is_excluded() {
        let (lo, _) = alpha_window(2).unwrap();
        let r = validate_assumption_f(
            &MobilitySpec::power(1.0, lo),
            2,
            &MobilitySamplingPlan::default(),
        )
        .unwrap();
        assert!(!report(&r, "f_alpha_window").pass);
    }

    #[test]
    fn shifted_mobility_fails_zero_limit() {
        let mut f = MobilitySpec::power_sum(vec![(1.0, 0.5)]);
        f.mobility = Arc::new(Shifted);
        let r = validate_assumption_f(&f, 1, &MobilitySamplingPlan::default()).unwrap();
        assert!(!report(&r, "f_zero_limit").pass);
    }

    struct Shifted;
    impl crate::lagrangian::Mobility for Shifted {
        fn value(&self, z: f64) -> f64 {
            1.0 + z.sqrt()
        }
        fn d1(&self, z: f64) -> f64 {
            0.5 / z.sqrt()
        }
        fn d2(&self, z: f64) -> f64 {
            -0.25 * z.powf(-1.5)
        }
        fn d3(&self, z: f64) -> f64 {
            0.375 * z.powf(-2.5)
        }
    }

    #[test]
    fn window_endpoints() {
        assert!(alpha_window(1).unwrap().0.abs() < 1e-15);
        assert!((alpha_window(2).unwrap().0 - 0.190983).abs() < 1e-6);
        assert!(alpha_window(0).is_err());
        for d in 1..200 {
            let lo = alpha_window(d).unwrap().0;
            assert!((0.0..0.5).contains(&lo) && lo >= 0.5 - 1.0 / d as f64);
        }
    }

    /// Largest delta in (0, 1] satisfying the linear condition, by bisection.
    fn bisect_delta(delta_bar: f64, d: usize) -> f64 {
        let df = d as f64;
        let b = delta_bar - 1.0 - df / 2.0 + 0.5 * (df * df + 8.0 * df).sqrt();
        let ok = |x: f64| delta_bar - x * b >= 0.0;
        if ok(1.0) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn dissipation_constants_match_bisection() {
        let (chi, delta) = dissipation_constants(&MobilitySpec::sqrt(), 1).unwrap();
        assert!((chi - 1.0 / 3.0).abs() < 1e-15);
        assert!((delta - 0.5 * bisect_delta(1.0, 1)).abs() < 1e-12);
        let (chi8, _) = dissipation_constants(&MobilitySpec::sqrt(), 8).unwrap();
        assert!((chi8 - 0.5f64.sqrt()).abs() < 1e-15);
        let mut f = MobilitySpec::power(1.0, 0.3);
        for d in [1, 2, 3] {
            let (_, delta) = dissipation_constants(&f, d).unwrap();
            assert!((delta - 0.5 * bisect_delta(f.delta_bar, d)).abs() < 1e-12);
        }
        f.delta_bar = 0.0;
        assert!(matches!(
            dissipation_constants(&f, 1),
            Err(Error::InvalidMobility(_))
        ));
    }
}
