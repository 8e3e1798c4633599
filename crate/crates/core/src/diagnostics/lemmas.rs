use crate::certificate::CertificateReport;
use crate::error::{Error, Result};
use crate::stencil;
use crate::transport::GridDensity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::ops::RangeInclusive;

/// Values within this fraction of the scale are recomputed in double-double
/// arithmetic before being judged.
const REVERIFY_BAND: f64 = 1e-8;

/// Tolerance of the matrix lemma relative to its scale.
pub const LEMMA_TOLERANCE: f64 = 1e-12;

/// Double-double number `hi + lo`.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn two_prod(a: f64, b: f64) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Self::two_sum(s.hi, lo)
    }

    fn mul(self, o: Self) -> Self {
        let p = Self::two_prod(self.hi, o.hi);
        let lo = p.lo + self.hi * o.lo + self.lo * o.hi;
        Self::two_sum(p.hi, lo)
    }

    fn div_f64(self, d: f64) -> Self {
        let q = self.hi / d;
        let r = self.add(Self::two_prod(q, d).neg());
        Self::two_sum(q, r.hi / d)
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

fn lemma_terms(a: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let d = v.len();
    let frob: f64 = a.iter().map(|x| x * x).sum();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += v[i] * a[i * d + j] * v[j];
        }
    }
    let v2: f64 = v.iter().map(|x| x * x).sum();
    (frob, quad, v2)
}

fn lemma_value_dd(a: &[f64], v: &[f64]) -> f64 {
    let d = v.len();
    let mut acc = Dd::from(0.0);
    for x in a {
        acc = acc.add(Dd::two_prod(*x, *x));
    }
    for i in 0..d {
        for j in 0..d {
            let p = Dd::two_prod(v[i], a[i * d + j]).mul(Dd::from(2.0 * v[j]));
            acc = acc.add(p);
        }
    }
    let mut v2 = Dd::from(0.0);
    for x in v {
        v2 = v2.add(Dd::two_prod(*x, *x));
    }
    let quartic = v2.mul(v2).mul(Dd::from((d - 1) as f64)).div_f64(d as f64);
    acc.add(quartic).value()
}

/// Checks `|A|_F^2 + 2 v.Av + (d - 1)/d |v|^4 >= 0` for a symmetric traceless
/// `A` given row-major. The tolerance is `1e-12` of the scale
/// `(|A|_F + |v|^2)^2`; values close to zero are recomputed in double-double
/// arithmetic.
pub fn traceless_lemma_check(a: &[f64], v: &[f64]) -> Result<CertificateReport> {
    let d = v.len();
    if d < 2 || a.len() != d * d {
        return Err(Error::Precondition(format!(
            "need a d x d matrix with d >= 2, got {} entries for d = {d}",
            a.len()
        )));
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let trace: f64 = (0..d).map(|i| a[i * d + i]).sum();
    if trace.abs() > 1e-12 * norm {
        return Err(Error::Precondition(format!("trace {trace:e} is not zero")));
    }
    for i in 0..d {
        for j in 0..i {
            if (a[i * d + j] - a[j * d + i]).abs() > 1e-12 * norm {
                return Err(Error::Precondition(format!(
                    "entry ({i}, {j}) breaks symmetry"
                )));
            }
        }
    }
    let (frob, quad, v2) = lemma_terms(a, v);
    let mut value = frob + 2.0 * quad + (d - 1) as f64 / d as f64 * v2 * v2;
    let scale = (norm + v2).powi(2);
    let mut note = format!("d = {d}");
    if value.abs() <= REVERIFY_BAND * scale {
        value = lemma_value_dd(a, v);
        note.push_str(", re-verified in double-double");
    }
    Ok(
        CertificateReport::new("traceless", None, 0.0, value, LEMMA_TOLERANCE * scale)
            .with_note(note),
    )
}

/// The equality configuration `d = 2`, `A = diag(-1/2, 1/2)`, `v = e_1`.
pub fn traceless_equality_case() -> (Vec<f64>, Vec<f64>) {
    (vec![-0.5, 0.0, 0.0, 0.5], vec![1.0, 0.0])
}

#[derive(Clone, Debug, Serialize)]
pub struct TracelessSweep {
    pub samples: usize,
    pub failures: usize,
    /// Samples whose value fell in the band recomputed in double-double.
    pub reverified: usize,
    /// Smallest value divided by its scale.
    pub min_normalized: f64,
    pub report: CertificateReport,
}

/// Random orthogonal matrix from Gram-Schmidt on a random matrix.
fn random_rotation(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut q = vec![0.0; d * d];
    for col in 0..d {
        loop {
            let mut c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for prev in 0..col {
                let dot: f64 = (0..d).map(|i| c[i] * q[i * d + prev]).sum();
                for i in 0..d {
                    c[i] -= dot * q[i * d + prev];
                }
            }
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 {
                for i in 0..d {
                    q[i * d + col] = c[i] / n;
                }
                break;
            }
        }
    }
    q
}

/// `S diag(lambda) S^T`.
fn conjugate(s: &[f64], lambda: &[f64]) -> Vec<f64> {
    let d = lambda.len();
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let x: f64 = (0..d)
                .map(|k| s[i * d + k] * lambda[k] * s[j * d + k])
                .sum();
            a[i * d + j] = x;
            a[j * d + i] = x;
        }
    }
    a
}

/// Half generic samples, half perturbations of the equality configuration
/// `lambda = |v|^2 (-(d-1)/d, 1/d, ..., 1/d)` with `v` along the first
/// eigenvector, in random orientation.
fn sample(d: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    if rng.gen_bool(0.5) {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let x = rng.gen_range(-1.0..1.0) * scale;
                a[i * d + j] = x;
                a[j * d + i] = x;
            }
        }
        let mean = (0..d).map(|i| a[i * d + i]).sum::<f64>() / d as f64;
        for i in 0..d {
            a[i * d + i] -= mean;
        }
        let v = (0..d)
            .map(|_| rng.gen_range(-1.0..1.0) * scale.sqrt())
            .collect();
        (a, v)
    } else {
        let r2 = scale;
        let jitter = 10f64.powf(rng.gen_range(-9.0..-2.0));
        let mut lambda: Vec<f64> = (0..d)
            .map(|k| {
                let base = if k == 0 {
                    -((d - 1) as f64) / d as f64
                } else {
                    1.0 / d as f64
                };
                r2 * (base + jitter * rng.gen_range(-1.0..1.0))
            })
            .collect();
        let mean = lambda.iter().sum::<f64>() / d as f64;
        lambda.iter_mut().for_each(|l| *l -= mean);
        let s = random_rotation(d, rng);
        let a = conjugate(&s, &lambda);
        let v = (0..d)
            .map(|i| r2.sqrt() * (s[i * d] + jitter * rng.gen_range(-1.0..1.0)))
            .collect();
        (a, v)
    }
}

/// Randomized check of the matrix lemma over `samples` draws spread evenly
/// across the dimensions in `dims`.
pub fn traceless_sweep(
    samples: usize,
    dims: RangeInclusive<usize>,
    seed: u64,
) -> Result<TracelessSweep> {
    let dims: Vec<usize> = dims.collect();
    if dims.is_empty() || dims[0] < 2 {
        return Err(Error::Precondition("dimensions must be at least 2".into()));
    }
    const CHUNK: usize = 1000;
    let chunks = samples.div_ceil(CHUNK);
    let results: Vec<(usize, usize, f64, Option<CertificateReport>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let mut failures = 0;
            let mut reverified = 0;
            let mut min_norm = f64::INFINITY;
            let mut worst: Option<CertificateReport> = None;
            for k in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let d = dims[k % dims.len()];
                let (a, v) = sample(d, &mut rng);
                let r = traceless_lemma_check(&a, &v)?;
                failures += usize::from(!r.pass);
                reverified += usize::from(r.note.contains("double-double"));
                let normalized = r.rhs * LEMMA_TOLERANCE / r.tolerance.max(f64::MIN_POSITIVE);
                if normalized < min_norm {
                    min_norm = normalized;
                    worst = Some(r);
                }
            }
            Ok((failures, reverified, min_norm, worst))
        })
        .collect::<Result<_>>()?;
    let failures = results.iter().map(|r| r.0).sum();
    let reverified = results.iter().map(|r| r.1).sum();
    let (min_normalized, worst) = results
        .into_iter()
        .map(|r| (r.2, r.3))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one chunk");
    let mut report = worst.expect("at least one sample");
    report.name = "traceless_sweep".into();
    report.note = format!(
        "{samples} samples, {failures} failures, {reverified} re-verified; worst {}",
        report.note
    );
    Ok(TracelessSweep {
        samples,
        failures,
        reverified,
        min_normalized,
        report,
    })
}

/// In one dimension the reflecting stencil gives `u' = 0` at both walls, so
/// `u' u'' nu` vanishes there. Reports the larger of the two endpoint values
/// against zero. The curvature term present for `d >= 2` is not exercised.
pub fn boundary_sign_check(u: &GridDensity) -> CertificateReport {
    let h = u.cell_width();
    let v = u.values();
    let m = v.len();
    let second = stencil::second_difference_vec(v, h);
    let faces: Vec<_> = stencil::faces(u.domain().lo, h, v).collect();
    let left = -faces[0].p * second[0];
    let right = faces[m].p * second[m - 1];
    CertificateReport::new("boundary_sign", None, left.max(right), 0.0, 0.0)
        .with_note("one-dimensional identity; the boundary curvature term of d >= 2 is not tested")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::Interval;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn equality_case_is_zero() {
        let (a, v) = traceless_equality_case();
        let r = traceless_lemma_check(&a, &v).unwrap();
        assert!(r.rhs.abs() < 1e-14 && r.pass);
        assert!(r.note.contains("double-double"));
    }

    #[test]
    fn zero_matrix_gives_quartic_term() {
        let r = traceless_lemma_check(&[0.0; 9], &[1.0, 1.0, 0.0]).unwrap();
        assert!((r.rhs - 2.0 / 3.0 * 4.0).abs() < 1e-14);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(
            traceless_lemma_check(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            traceless_lemma_check(&[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            traceless_lemma_check(&[0.0], &[1.0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn double_double_matches_plain_evaluation() {
        let a = [0.3, -0.2, 0.1, -0.2, -0.5, 0.4, 0.1, 0.4, 0.2];
        let v = [0.7, -0.1, 0.25];
        let (frob, quad, v2) = lemma_terms(&a, &v);
        let plain = frob + 2.0 * quad + 2.0 / 3.0 * v2 * v2;
        assert!((lemma_value_dd(&a, &v) - plain).abs() < 1e-15);
    }

    #[test]
    fn sweep_is_clean_and_reproducible() {
        let a = traceless_sweep(4000, 2..=10, 7).unwrap();
        assert_eq!(a.failures, 0);
        assert!(a.reverified > 0);
        let b = traceless_sweep(4000, 2..=10, 7).unwrap();
        assert_eq!(a.min_normalized, b.min_normalized);
    }

    #[test]
    fn boundary_term_vanishes() {
        let u = GridDensity::from_fn(Interval::unit(), 64, |x| {
            1.0 + 0.4 * (3.0 * PI * x).cos() + 0.2 * x
        })
        .unwrap();
        let r = boundary_sign_check(&u);
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    proptest! {
        #[test]
        fn lemma_holds_for_diagonal_matrices(l in proptest::collection::vec(-5.0f64..5.0, 2..8), w in proptest::collection::vec(-2.0f64..2.0, 8)) {
            let d = l.len();
            let mean = l.iter().sum::<f64>() / d as f64;
            let mut a = vec![0.0; d * d];
            for i in 0..d {
                a[i * d + i] = l[i] - mean;
            }
            let r = traceless_lemma_check(&a, &w[..d]).unwrap();
            prop_assert!(r.pass);
        }
    }
}
