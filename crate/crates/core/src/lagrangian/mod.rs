//! Energy densities, mobility energies, weak-form operators and the
//! validators for the structural assumptions on them.

mod energy;
mod test_function;
mod validate;

pub use energy::{
    energy, mobility_energy, weak_operator_bound, weak_operator_n, weak_operator_nf,
    EnergyFunctional, MOBILITY_FLOOR,
};
pub use test_function::{TemporalWeight, TestFunction};
pub use validate::{
    alpha_window, dissipation_constants, validate_assumption_a, validate_assumption_f,
    MobilitySamplingPlan, SamplingPlan,
};

use std::fmt;
use std::sync::Arc;

/// Energy density `F(x, z, p)` in one space dimension.
pub trait Lagrangian: Send + Sync {
    fn value(&self, x: f64, z: f64, p: f64) -> f64;
    fn d_x(&self, x: f64, z: f64, p: f64) -> f64;
    fn d_z(&self, x: f64, z: f64, p: f64) -> f64;
    fn d_p(&self, x: f64, z: f64, p: f64) -> f64;
    /// Hessian in the variable order `(x, z, p)`.
    fn hessian(&self, x: f64, z: f64, p: f64) -> [[f64; 3]; 3];
}

/// Declared structural constants of a Lagrangian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangianConstants {
    /// Convexity modulus in `p`.
    pub gamma: f64,
    /// Coercivity `c p^2 <= F`.
    pub c_lower: f64,
    /// Growth `F <= C (p^2 + 1)`.
    pub c_upper: f64,
    /// Bound `D` on `|F_x|`, `tr F_xx`, `z |F_z|` and `|F_p|^2`.
    pub d_bound: f64,
}

#[derive(Clone)]
pub struct LagrangianSpec {
    pub name: String,
    pub density: Arc<dyn Lagrangian>,
    pub constants: LagrangianConstants,
    /// Whether `F` depends on `x`.
    pub x_dependent: bool,
}

impl fmt::Debug for LagrangianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianSpec")
            .field("name", &self.name)
            .field("constants", &self.constants)
            .field("x_dependent", &self.x_dependent)
            .finish()
    }
}

struct ThinFilm;

impl Lagrangian for ThinFilm {
    fn value(&self, _x: f64, _z: f64, p: f64) -> f64 {
        0.5 * p * p
    }
    fn d_x(&self, _x: f64, _z: f64, _p: f64) -> f64 {
        0.0
    }
    fn d_z(&self, _x: f64, _z: f64, _p: f64) -> f64 {
        0.0
    }
    fn d_p(&self, _x: f64, _z: f64, p: f64) -> f64 {
        p
    }
    fn hessian(&self, _x: f64, _z: f64, _p: f64) -> [[f64; 3]; 3] {
        [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
    }
}

/// `F = 1/2 f'(z)^2 p^2`.
struct MobilityLagrangian(Arc<dyn Mobility>);

impl Lagrangian for MobilityLagrangian {
    fn value(&self, _x: f64, z: f64, p: f64) -> f64 {
        let g = self.0.d1(z);
        0.5 * g * g * p * p
    }
    fn d_x(&self, _x: f64, _z: f64, _p: f64) -> f64 {
        0.0
    }
    fn d_z(&self, _x: f64, z: f64, p: f64) -> f64 {
        self.0.d1(z) * self.0.d2(z) * p * p
    }
    fn d_p(&self, _x: f64, z: f64, p: f64) -> f64 {
        let g = self.0.d1(z);
        g * g * p
    }
    fn hessian(&self, _x: f64, z: f64, p: f64) -> [[f64; 3]; 3] {
        let (f1, f2, f3) = (self.0.d1(z), self.0.d2(z), self.0.d3(z));
        let zz = (f2 * f2 + f1 * f3) * p * p;
        let zp = 2.0 * f1 * f2 * p;
        [[0.0, 0.0, 0.0], [0.0, zz, zp], [0.0, zp, f1 * f1]]
    }
}

impl LagrangianSpec {
    pub fn new(
        name: impl Into<String>,
        density: Arc<dyn Lagrangian>,
        constants: LagrangianConstants,
        x_dependent: bool,
    ) -> Self {
        Self {
            name: name.into(),
            density,
            constants,
            x_dependent,
        }
    }

    /// Dirichlet energy `F = 1/2 p^2`.
    pub fn thin_film() -> Self {
        Self::new(
            "thin_film",
            Arc::new(ThinFilm),
            LagrangianConstants {
                gamma: 1.0,
                c_lower: 0.5,
                c_upper: 0.5,
                d_bound: 1.0,
            },
            false,
        )
    }

    /// `F = 1/2 f'(z)^2 p^2` viewed as a general Lagrangian, with caller-declared constants.
    pub fn from_mobility(mobility: &MobilitySpec, constants: LagrangianConstants) -> Self {
        Self::new(
            format!("lagrangian_of_{}", mobility.name),
            Arc::new(MobilityLagrangian(mobility.mobility.clone())),
            constants,
            false,
        )
    }

    /// Constant of the lower-order term in the entropy-dissipation estimate:
    /// `D max(1, L) / (4 gamma)` when `F` depends on `x`, zero otherwise.
    pub fn c3(&self, length: f64) -> f64 {
        if self.x_dependent {
            self.constants.d_bound * length.max(1.0) / (4.0 * self.constants.gamma)
        } else {
            0.0
        }
    }
}

/// Mobility nonlinearity `f` with derivatives up to third order on `z > 0`.
pub trait Mobility: Send + Sync {
    fn value(&self, z: f64) -> f64;
    fn d1(&self, z: f64) -> f64;
    fn d2(&self, z: f64) -> f64;
    fn d3(&self, z: f64) -> f64;
}

/// `sum_k c_k z^{a_k}`.
#[derive(Clone, Debug)]
pub struct PowerSum(pub Vec<(f64, f64)>);

impl PowerSum {
    fn eval(&self, z: f64, order: i32) -> f64 {
        self.0
            .iter()
            .map(|&(c, a)| {
                let mut coef = c;
                for j in 0..order {
                    coef *= a - j as f64;
                }
                if coef == 0.0 {
                    0.0
                } else {
                    coef * z.powf(a - order as f64)
                }
            })
            .sum()
    }
}

impl Mobility for PowerSum {
    fn value(&self, z: f64) -> f64 {
        self.eval(z, 0)
    }
    fn d1(&self, z: f64) -> f64 {
        self.eval(z, 1)
    }
    fn d2(&self, z: f64) -> f64 {
        self.eval(z, 2)
    }
    fn d3(&self, z: f64) -> f64 {
        self.eval(z, 3)
    }
}

#[derive(Clone)]
pub struct MobilitySpec {
    pub name: String,
    pub mobility: Arc<dyn Mobility>,
    /// Exponent in `f'(z) >= C z^{alpha - 1}`.
    pub alpha: f64,
    /// Constant `C` in the same bound.
    pub c_lower: f64,
    /// Margin in the third-derivative ratio condition for `d = 1`.
    pub delta_bar: f64,
    /// `lim_{z -> 0} z f'(z)`, used where the density vanishes.
    pub zf_limit: Option<f64>,
}

impl fmt::Debug for MobilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MobilitySpec")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("c_lower", &self.c_lower)
            .field("delta_bar", &self.delta_bar)
            .field("zf_limit", &self.zf_limit)
            .finish()
    }
}

impl MobilitySpec {
    /// `f(z) = coefficient * z^alpha`.
    pub fn power(coefficient: f64, alpha: f64) -> Self {
        let delta_bar = if alpha < 1.0 {
            alpha / (1.0 - alpha)
        } else {
            1.0
        };
        Self {
            name: format!("power({coefficient}, {alpha})"),
            mobility: Arc::new(PowerSum(vec![(coefficient, alpha)])),
            alpha,
            c_lower: coefficient * alpha,
            delta_bar,
            zf_limit: Some(0.0),
        }
    }

    /// `f(z) = sqrt(z)`, the quantum drift-diffusion case.
    pub fn sqrt() -> Self {
        Self {
            name: "sqrt".into(),
            ..Self::power(1.0, 0.5)
        }
    }

    /// `f(z) = z`, which is not strictly concave.
    pub fn identity() -> Self {
        Self {
            name: "identity".into(),
            ..Self::power(1.0, 1.0)
        }
    }

    /// `f(z) = sum c_k z^{a_k}` with positive coefficients and exponents in `(0, 1]`.
    ///
    /// `alpha` and `C` come from the smallest exponent; `delta_bar` is the
    /// smallest sampled value of the ratio margin for `d = 1`.
    pub fn power_sum(terms: Vec<(f64, f64)>) -> Self {
        let (c_min, a_min) = terms
            .iter()
            .cloned()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or((1.0, 1.0));
        let f = PowerSum(terms);
        let required = validate::ratio_requirement(1, 0.0);
        let delta_bar = (-120..=120)
            .map(|k| {
                let z = 10f64.powf(k as f64 / 10.0);
                let f2 = f.d2(z);
                f.d3(z) * f.d1(z) / (f2 * f2) - required
            })
            .fold(f64::INFINITY, f64::min);
        let delta_bar = if delta_bar.is_finite() {
            delta_bar * (1.0 - 1e-9)
        } else {
            1.0
        };
        Self {
            name: "power_sum".into(),
            mobility: Arc::new(f),
            alpha: a_min,
            c_lower: c_min * a_min,
            delta_bar,
            zf_limit: Some(0.0),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        self.mobility.value(z)
    }

    pub fn d1(&self, z: f64) -> f64 {
        self.mobility.d1(z)
    }

    pub fn d2(&self, z: f64) -> f64 {
        self.mobility.d2(z)
    }

    pub fn d3(&self, z: f64) -> f64 {
        self.mobility.d3(z)
    }
}
