use super::GridDensity;
use crate::error::{Error, Result};

/// Generalized inverse of the cumulative distribution of `u`:
/// `Q(s) = inf { x : C(x) >= s }` for `s > 0` and `Q(0) = inf supp u`.
///
/// `levels` must be nondecreasing values in `[0, 1]`.
pub fn quantile(u: &GridDensity, levels: &[f64]) -> Result<Vec<f64>> {
    if levels.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::Domain("quantile levels must lie in [0, 1]".into()));
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain(
            "quantile levels must be nondecreasing".into(),
        ));
    }
    let c = u.cdf_edges();
    let h = u.cell_width();
    let lo = u.domain().lo;
    let support_start = c.iter().position(|v| *v > 0.0).map_or(0, |e| e - 1);
    let mut e = 1;
    let mut out = Vec::with_capacity(levels.len());
    for &s in levels {
        if s == 0.0 {
            out.push(lo + support_start as f64 * h);
            continue;
        }
        // first edge with C[e] >= s; cell e - 1 then has C[e - 1] < s
        while c[e] < s {
            e += 1;
        }
        let frac = (s - c[e - 1]) / (c[e] - c[e - 1]);
        let x = lo + ((e - 1) as f64 + frac) * h;
        out.push(x.min(u.domain().hi));
    }
    Ok(out)
}

/// Quantile function sampled at midpoint mass levels, so that squared
/// distances become a weighted sum of squared differences.
#[derive(Clone, Debug)]
pub struct QuantileProfile {
    lo: f64,
    hi: f64,
    cells: usize,
    values: Vec<f64>,
}

impl QuantileProfile {
    /// Number of mass levels used for a grid of `m` cells.
    pub fn levels_for(m: usize) -> usize {
        (16 * m).max(4096)
    }

    pub fn new(u: &GridDensity) -> Self {
        let n = Self::levels_for(u.len());
        let levels: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let values = quantile(u, &levels).expect("midpoint levels are valid");
        Self {
            lo: u.domain().lo,
            hi: u.domain().hi,
            cells: u.len(),
            values,
        }
    }

    pub fn distance(&self, other: &QuantileProfile) -> Result<f64> {
        if self.lo != other.lo || self.hi != other.hi || self.cells != other.cells {
            return Err(Error::Config("densities live on different grids".into()));
        }
        let n = self.values.len() as f64;
        let sq: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((sq / n).sqrt())
    }
}

/// Quadratic Wasserstein distance through the quantile representation
/// `W2^2 = int_0^1 |Q_u(s) - Q_v(s)|^2 ds`.
pub fn wasserstein2(u: &GridDensity, v: &GridDensity) -> Result<f64> {
    if !u.same_grid(v) {
        return Err(Error::Config("densities live on different grids".into()));
    }
    QuantileProfile::new(u).distance(&QuantileProfile::new(v))
}

/// `int u log u` with `0 log 0 = 0`.
///
/// Evaluated as `sum h [u log(u/m) - u + m] + log m` with `m = 1/L`, which
/// equals the direct quadrature for unit mass but does not pick up the
/// rounding in the total mass.
pub fn boltzmann_entropy(u: &GridDensity) -> f64 {
    let h = u.cell_width();
    let mean = 1.0 / u.domain().length();
    let relative: f64 = u
        .values()
        .iter()
        .map(|&v| {
            if v == 0.0 {
                mean
            } else if v < 0.5 * mean {
                // (v - mean) / mean rounds to -1 for tiny v
                v * (v / mean).ln() - (v - mean)
            } else {
                let r = (v - mean) / mean;
                v * r.ln_1p() - (v - mean)
            }
        })
        .sum();
    h * relative + mean.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::Interval;
    use proptest::prelude::*;

    #[test]
    fn quantile_of_uniform_is_linear() {
        let d = Interval::new(2.0, 4.0).unwrap();
        let u = GridDensity::uniform(d, 10).unwrap();
        let q = quantile(&u, &[0.0, 0.25, 0.5, 1.0]).unwrap();
        for (a, b) in q.iter().zip([2.0, 2.5, 3.0, 4.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn quantile_skips_zero_plateaus() {
        let mut v = vec![0.0; 10];
        v[2] = 5.0;
        v[5] = 5.0;
        let u = GridDensity::new(Interval::unit(), v).unwrap();
        let q = quantile(&u, &[0.0, 0.5, 0.5000001, 1.0]).unwrap();
        assert!((q[0] - 0.2).abs() < 1e-14);
        assert!((q[1] - 0.3).abs() < 1e-14);
        assert!(q[2] > 0.5 && q[2] < 0.5001);
        assert!((q[3] - 0.6).abs() < 1e-14);
    }

    #[test]
    fn quantile_rejects_bad_levels() {
        let u = GridDensity::uniform(Interval::unit(), 8).unwrap();
        assert!(matches!(quantile(&u, &[0.2, 1.2]), Err(Error::Domain(_))));
        assert!(matches!(quantile(&u, &[0.5, 0.2]), Err(Error::Domain(_))));
    }

    #[test]
    fn distance_between_point_like_masses() {
        // two cell-width blocks: all mass moves by exactly the offset
        let m = 64;
        let block = |c: usize| {
            let mut v = vec![0.0; m];
            v[c] = m as f64;
            GridDensity::new(Interval::unit(), v).unwrap()
        };
        let w = wasserstein2(&block(10), &block(30)).unwrap();
        assert!((w - 20.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let u = GridDensity::uniform(Interval::unit(), 32).unwrap();
        assert!(boltzmann_entropy(&u).abs() < 1e-15);
        let half = GridDensity::uniform(Interval::new(0.0, 0.5).unwrap(), 32).unwrap();
        assert!((boltzmann_entropy(&half) - 2f64.ln()).abs() < 1e-14);
        let mut v = vec![0.0; 32];
        v[..16].iter_mut().for_each(|x| *x = 2.0);
        let gapped = GridDensity::new(Interval::unit(), v).unwrap();
        assert!((boltzmann_entropy(&gapped) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn entropy_is_finite_for_tiny_values() {
        let mut v = vec![1.0; 16];
        v[3] = 1e-300;
        let u = GridDensity::normalized(Interval::unit(), v).unwrap();
        let e = boltzmann_entropy(&u);
        assert!(e.is_finite() && e > 0.0);
    }

    #[test]
    fn entropy_matches_direct_quadrature() {
        let u =
            GridDensity::from_fn(Interval::unit(), 100, |x| 1.0 + 0.9 * (6.0 * x).cos()).unwrap();
        let h = u.cell_width();
        let direct: f64 = u.values().iter().map(|v| h * v * v.ln()).sum();
        assert!((boltzmann_entropy(&u) - direct).abs() < 1e-13);
    }

    fn density(m: usize) -> impl Strategy<Value = GridDensity> {
        proptest::collection::vec(0.05f64..3.0, m)
            .prop_map(|v| GridDensity::normalized(Interval::unit(), v).unwrap())
    }

    proptest! {
        #[test]
        fn metric_axioms(u in density(32), v in density(32), w in density(32)) {
            let duv = wasserstein2(&u, &v).unwrap();
            let dvu = wasserstein2(&v, &u).unwrap();
            prop_assert!((duv - dvu).abs() < 1e-14);
            prop_assert!(wasserstein2(&u, &u).unwrap() == 0.0);
            let duw = wasserstein2(&u, &w).unwrap();
            let dwv = wasserstein2(&w, &v).unwrap();
            prop_assert!(duv <= duw + dwv + 1e-12);
        }

        #[test]
        fn quantile_is_monotone_and_in_domain(u in density(24)) {
            let levels: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
            let q = quantile(&u, &levels).unwrap();
            prop_assert!(q.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(q.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn entropy_is_bounded_below_by_minus_log_length(u in density(16)) {
            prop_assert!(boltzmann_entropy(&u) >= -1e-14);
        }
    }
}
