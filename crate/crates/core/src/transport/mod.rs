//! Densities on a uniform grid, monotone transport maps and the quadratic
//! Wasserstein distance on a bounded interval.

mod flow;
mod map;
mod wasserstein;

pub use flow::{perturbation_flow, volume_distortion_check, VOLUME_DISTORTION_TOLERANCE};
pub use map::{density_from_map, map_from_density, EdgeLocation, MapCdf, TransportMap};
pub use wasserstein::{boltzmann_entropy, quantile, wasserstein2, QuantileProfile};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Smallest admissible number of grid cells or map intervals.
pub const MIN_CELLS: usize = 8;

/// Allowed deviation of `h * sum(u)` from one.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::Domain(format!(
                "interval [{lo}, {hi}] is empty or not finite"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Nonnegative cell averages of a unit-mass density on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    domain: Interval,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(domain: Interval, values: Vec<f64>) -> Result<Self> {
        Interval::new(domain.lo, domain.hi)?;
        if values.len() < MIN_CELLS {
            return Err(Error::Domain(format!(
                "grid needs at least {MIN_CELLS} cells, got {}",
                values.len()
            )));
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidDensity(format!("cell {j} has value {v}")));
        }
        let h = domain.length() / values.len() as f64;
        let mass = h * values.iter().sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "mass {mass} differs from one"
            )));
        }
        Ok(Self { domain, values })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(domain: Interval, mut values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_CELLS {
            return Err(Error::Domain(format!(
                "grid needs at least {MIN_CELLS} cells, got {}",
                values.len()
            )));
        }
        let h = domain.length() / values.len() as f64;
        let mass = h * values.iter().sum::<f64>();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidDensity(format!(
                "cannot normalize total mass {mass}"
            )));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::new(domain, values)
    }

    /// Samples `f` at cell midpoints and normalizes to unit mass.
    pub fn from_fn(domain: Interval, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Interval::new(domain.lo, domain.hi)?;
        let h = domain.length() / m.max(1) as f64;
        let values = (0..m)
            .map(|j| f(domain.lo + (j as f64 + 0.5) * h))
            .collect();
        Self::normalized(domain, values)
    }

    pub fn uniform(domain: Interval, m: usize) -> Result<Self> {
        Self::from_fn(domain, m, |_| 1.0)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_width(&self) -> f64 {
        self.domain.length() / self.values.len() as f64
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        self.domain.lo + (j as f64 + 0.5) * self.cell_width()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.midpoint(j)).collect()
    }

    pub fn edge(&self, e: usize) -> f64 {
        if e == self.len() {
            self.domain.hi
        } else {
            self.domain.lo + e as f64 * self.cell_width()
        }
    }

    pub fn mass(&self) -> f64 {
        self.cell_width() * self.values.iter().sum::<f64>()
    }

    /// Cumulative mass at the `M + 1` cell edges, rescaled to end exactly at one.
    pub fn cdf_edges(&self) -> Vec<f64> {
        let h = self.cell_width();
        let mut c = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        c.push(0.0);
        for v in &self.values {
            acc += h * v;
            c.push(acc);
        }
        let total = acc;
        c.iter_mut().for_each(|x| *x /= total);
        c
    }

    pub fn same_grid(&self, other: &GridDensity) -> bool {
        self.domain == other.domain && self.len() == other.len()
    }
}
