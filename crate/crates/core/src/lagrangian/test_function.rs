use crate::transport::Interval;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smooth spatial test function `phi` with its first three derivatives.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    derivatives: [Scalar; 4],
    sup_norms: [f64; 4],
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("sup_norms", &self.sup_norms)
            .finish()
    }
}

impl TestFunction {
    /// Builds a test function from closures; sup norms are sampled on `domain`.
    pub fn new(
        name: impl Into<String>,
        domain: Interval,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d3: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let derivatives: [Scalar; 4] = [Arc::new(value), Arc::new(d1), Arc::new(d2), Arc::new(d3)];
        let n = 4096;
        let mut sup_norms = [0.0f64; 4];
        for k in 0..=n {
            let x = domain.lo + domain.length() * k as f64 / n as f64;
            for (s, d) in sup_norms.iter_mut().zip(&derivatives) {
                *s = s.max(d(x).abs());
            }
        }
        Self {
            name: name.into(),
            derivatives,
            sup_norms,
        }
    }

    /// `cos(k pi (x - lo) / L)`, which satisfies the Neumann condition.
    pub fn cosine(domain: Interval, k: f64) -> Self {
        let w = k * PI / domain.length();
        let lo = domain.lo;
        let mut phi = Self::new(
            format!("cos({k} pi x)"),
            domain,
            move |x| (w * (x - lo)).cos(),
            move |x| -w * (w * (x - lo)).sin(),
            move |x| -w * w * (w * (x - lo)).cos(),
            move |x| w * w * w * (w * (x - lo)).sin(),
        );
        if k != 0.0 && k.fract() == 0.0 {
            phi.sup_norms = [1.0, w.abs(), w * w, (w * w * w).abs()];
        }
        phi
    }

    pub fn constant(c: f64) -> Self {
        Self {
            name: format!("{c}"),
            derivatives: [
                Arc::new(move |_| c),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
            ],
            sup_norms: [c.abs(), 0.0, 0.0, 0.0],
        }
    }

    /// `slope * (x - lo)`; not Neumann-compatible, useful for translations.
    pub fn linear(domain: Interval, slope: f64) -> Self {
        let lo = domain.lo;
        Self::new(
            format!("{slope} x"),
            domain,
            move |x| slope * (x - lo),
            move |_| slope,
            |_| 0.0,
            |_| 0.0,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.derivatives[0])(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        (self.derivatives[1])(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        (self.derivatives[2])(x)
    }

    pub fn d3(&self, x: f64) -> f64 {
        (self.derivatives[3])(x)
    }

    /// `max(sup |phi|, sup |phi'|, sup |phi''|)`.
    pub fn c2_norm(&self) -> f64 {
        self.sup_norms[..3].iter().cloned().fold(0.0, f64::max)
    }

    /// `max` of the sup norms up to the third derivative.
    pub fn c3_norm(&self) -> f64 {
        self.sup_norms.iter().cloned().fold(0.0, f64::max)
    }

    /// `a phi + b psi`.
    pub fn combine(
        a: f64,
        phi: &TestFunction,
        b: f64,
        psi: &TestFunction,
        domain: Interval,
    ) -> Self {
        let (p, q) = (phi.derivatives.clone(), psi.derivatives.clone());
        let part = |k: usize| {
            let (p, q) = (p[k].clone(), q[k].clone());
            move |x: f64| a * p(x) + b * q(x)
        };
        Self::new(
            format!("{a} {} + {b} {}", phi.name, psi.name),
            domain,
            part(0),
            part(1),
            part(2),
            part(3),
        )
    }
}

/// Temporal weight `eta` with compact support inside `(0, infinity)`.
#[derive(Clone)]
pub struct TemporalWeight {
    support: (f64, f64),
    eval: Scalar,
    sup: f64,
}

impl fmt::Debug for TemporalWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TemporalWeight")
            .field("support", &self.support)
            .field("sup", &self.sup)
            .finish()
    }
}

impl TemporalWeight {
    /// Smooth bump `exp(1 - 1/(1 - r^2))` on `(t0, t1)`, with maximum one.
    pub fn bump(t0: f64, t1: f64) -> Self {
        let (c, r) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        Self {
            support: (t0, t1),
            eval: Arc::new(move |t| {
                let q = (t - c) / r;
                if q.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - q * q)).exp()
                }
            }),
            sup: 1.0,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_derivatives_and_norms() {
        let phi = TestFunction::cosine(Interval::unit(), 2.0);
        let w = 2.0 * PI;
        assert!((phi.d2(0.1) + w * w * (w * 0.1).cos()).abs() < 1e-12);
        assert!((phi.c2_norm() - w * w).abs() < 1e-12);
        assert!(phi.d1(0.0).abs() < 1e-15 && phi.d1(1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_norms_match_closed_form() {
        let d = Interval::unit();
        let phi = TestFunction::new(
            "c",
            d,
            |x| (3.0 * PI * x).cos(),
            |x| -3.0 * PI * (3.0 * PI * x).sin(),
            |x| -9.0 * PI * PI * (3.0 * PI * x).cos(),
            |_| 0.0,
        );
        assert!((phi.c2_norm() - 9.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let eta = TemporalWeight::bump(1.0, 3.0);
        assert_eq!(eta.eval(0.5), 0.0);
        assert_eq!(eta.eval(3.0), 0.0);
        assert!((eta.eval(2.0) - 1.0).abs() < 1e-15);
    }
}
