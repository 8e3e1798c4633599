//! Minimizing-movement time stepping in the Lagrangian (quantile) picture.
//!
//! The state of a step is the monotone map `X` at the mass levels `i/K`.
//! The squared Wasserstein distance to the previous map `P` is the
//! trapezoidal quadrature `sum_i dm_i (X_i - P_i)^2`, and the energy is
//! evaluated on the grid density pushed forward by `X`. Carrying the map
//! from step to step (instead of re-sampling quantiles of the grid density)
//! makes the previous state an admissible competitor with objective equal to
//! its energy, which is what the energy-descent certificate relies on.

mod optimizer;
mod refine;

pub use refine::{refine_study, RefinementStudy};

use crate::error::{Error, Result};
use crate::lagrangian::EnergyFunctional;
use crate::transport::{
    boltzmann_entropy, density_from_map, map_from_density, GridDensity, Interval, MapCdf,
    QuantileProfile, TransportMap, MIN_CELLS,
};
use optimizer::{minimize, BandMatrix, MonotoneBox, Options, Problem};
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct JkoConfig {
    pub tau: f64,
    pub n_steps: usize,
    /// Relative objective decrease below which the inner solver stops.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Number of map intervals `K`.
    pub map_nodes: usize,
    pub energy: EnergyFunctional,
    /// Test hook: at this step the minimization is skipped and the previous
    /// state is repeated.
    pub corrupt_step: Option<usize>,
}

impl JkoConfig {
    pub fn new(energy: EnergyFunctional, tau: f64, n_steps: usize) -> Self {
        Self {
            tau,
            n_steps,
            inner_tol: 1e-10,
            inner_max_iter: 500,
            map_nodes: 256,
            energy,
            corrupt_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!(
                "time step {} must be positive",
                self.tau
            )));
        }
        if self.map_nodes < MIN_CELLS {
            return Err(Error::Config(format!(
                "map needs at least {MIN_CELLS} intervals"
            )));
        }
        if !(self.inner_tol > 0.0) || self.inner_max_iter == 0 {
            return Err(Error::Config(
                "inner solver settings must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Checks the map resolution against an `m`-cell grid. Finer maps leave
    /// node motions inside a cell invisible to the energy, and the minimizer
    /// exploits them.
    pub fn validate_for_grid(&self, m: usize) -> Result<()> {
        self.validate()?;
        if self.map_nodes > m {
            return Err(Error::Config(format!(
                "{} map intervals exceed the {m} grid cells",
                self.map_nodes
            )));
        }
        Ok(())
    }
}

/// Per-step solver record.
#[derive(Clone, Debug, Serialize)]
pub struct StepDiagnostics {
    /// Objective at the previous state, which equals its energy.
    pub objective_start: f64,
    pub objective_end: f64,
    /// `sum dm (X - P)^2`, the squared distance of the step in the map picture.
    pub transport_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JkoTrajectory {
    pub energy_name: String,
    pub tau: f64,
    pub map_nodes: usize,
    pub inner_tol: f64,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub entropies: Vec<f64>,
    /// `W2(u^{n-1}, u^n)` for `n = 1..=N`.
    pub step_distances: Vec<f64>,
    pub steps: Vec<StepDiagnostics>,
    pub states: Vec<GridDensity>,
}

impl JkoTrajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn domain(&self) -> Interval {
        self.states[0].domain()
    }

    /// Piecewise-constant interpolant: `u^n` on `((n-1) tau, n tau]`.
    pub fn state_at(&self, t: f64) -> &GridDensity {
        let n = if t <= 0.0 {
            0
        } else {
            (t / self.tau - 1e-9).ceil() as usize
        };
        &self.states[n.min(self.n_steps())]
    }

    pub fn final_state(&self) -> &GridDensity {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory is serializable")
    }
}

struct StepProblem<'a> {
    energy: &'a EnergyFunctional,
    domain: Interval,
    masses: &'a [f64],
    prev: &'a [f64],
    weights: Vec<f64>,
    tau: f64,
    cells: usize,
    cdf: MapCdf,
    u: Vec<f64>,
    gu: Vec<f64>,
    hu_diag: Vec<f64>,
    hu_off: Vec<f64>,
    noise: f64,
}

fn trapezoid_weights(masses: &[f64]) -> Vec<f64> {
    let k = masses.len() - 1;
    (0..=k)
        .map(|i| {
            let left = if i > 0 {
                masses[i] - masses[i - 1]
            } else {
                0.0
            };
            let right = if i < k {
                masses[i + 1] - masses[i]
            } else {
                0.0
            };
            0.5 * (left + right)
        })
        .collect()
}

impl<'a> StepProblem<'a> {
    fn new(energy: &'a EnergyFunctional, prev: &'a TransportMap, tau: f64, cells: usize) -> Self {
        Self {
            energy,
            domain: prev.domain(),
            masses: prev.masses(),
            prev: prev.positions(),
            weights: trapezoid_weights(prev.masses()),
            tau,
            cells,
            cdf: MapCdf::with_edges(cells),
            u: vec![0.0; cells],
            gu: vec![0.0; cells],
            hu_diag: vec![0.0; cells],
            hu_off: vec![0.0; cells - 1],
            noise: 0.0,
        }
    }

    fn transport_cost(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.prev)
            .zip(&self.weights)
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum()
    }

    fn value(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let h = self.domain.length() / self.cells as f64;
        self.cdf.evaluate(self.domain, self.masses, x);
        self.cdf.cell_values(h, &mut self.u);
        let quad = self.transport_cost(x) / (2.0 * self.tau);
        match grad {
            None => quad + self.energy.evaluate(self.domain, &self.u, None),
            Some(g) => {
                let phi = self
                    .energy
                    .evaluate(self.domain, &self.u, Some(&mut self.gu));
                for i in 0..x.len() {
                    g[i] = self.weights[i] * (x[i] - self.prev[i]) / self.tau;
                }
                let m = self.cells;
                let mut jac = Vec::with_capacity(16);
                for e in 0..=m {
                    let left = if e > 0 { self.gu[e - 1] } else { 0.0 };
                    let right = if e < m { self.gu[e] } else { 0.0 };
                    let gc = (left - right) / h;
                    jac.clear();
                    self.cdf.edge_jacobian(e, self.masses, x, &mut jac);
                    for &(i, d) in &jac {
                        g[i] += gc * d;
                    }
                }
                quad + phi
            }
        }
    }

    /// Sparse rows of `du_j / dX`.
    fn density_jacobian(&self, x: &[f64]) -> Vec<Vec<(usize, f64)>> {
        let m = self.cells;
        let h = self.domain.length() / m as f64;
        let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m + 1];
        for (e, row) in edges.iter_mut().enumerate() {
            self.cdf.edge_jacobian(e, self.masses, x, row);
        }
        (0..m)
            .map(|j| {
                let mut row: Vec<(usize, f64)> =
                    edges[j + 1].iter().map(|&(i, d)| (i, d / h)).collect();
                row.extend(edges[j].iter().map(|&(i, d)| (i, -d / h)));
                row.sort_unstable_by_key(|p| p.0);
                row.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                row.retain(|p| p.1 != 0.0);
                row
            })
            .collect()
    }
}

/// Gauss-Newton model: the curvature of `u` as a function of `X` is dropped,
/// which keeps the model positive semidefinite. With it the Hessian is
/// indefinite on grid-scale node motions even near the minimizer.
impl Problem for StepProblem<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        StepProblem::value(self, x, None)
    }

    fn second_order(&mut self, x: &[f64], g: &mut [f64], hess: &mut BandMatrix) -> f64 {
        let value = StepProblem::value(self, x, Some(g));
        let m = self.cells;
        self.energy
            .evaluate_hessian(self.domain, &self.u, &mut self.hu_diag, &mut self.hu_off);
        hess.clear();
        for (i, w) in self.weights.iter().enumerate() {
            hess.add(i, i, w / self.tau);
        }
        let rows = self.density_jacobian(x);
        for j in 0..m {
            for k in j.saturating_sub(1)..(j + 2).min(m) {
                let hjk = if k == j {
                    self.hu_diag[j]
                } else {
                    self.hu_off[j.min(k)]
                };
                if hjk == 0.0 {
                    continue;
                }
                for &(p, vp) in &rows[j] {
                    for &(q, vq) in &rows[k] {
                        hess.accumulate(p, q, hjk * vp * vq);
                    }
                }
            }
        }
        // response of the energy to a rounding-sized change of each edge CDF value
        let h = self.domain.length() / m as f64;
        let dc = 4.0 * f64::EPSILON;
        let mut noise = 0.0;
        for e in 1..m {
            let gc = (self.gu[e - 1] - self.gu[e]) / h;
            let cc =
                (self.hu_diag[e - 1] + self.hu_diag[e] - 2.0 * self.hu_off[e - 1]).abs() / (h * h);
            noise += dc * gc.abs() + dc * dc * cc;
        }
        self.noise = noise;
        value
    }

    fn noise_floor(&self) -> f64 {
        self.noise
    }
}

/// `W2^2(X, P) / (2 tau) + Phi(push-forward of X)`, where `P` is the
/// quantile map of `v_prev` at the same mass levels as `candidate`.
pub fn penalized_objective(
    candidate: &TransportMap,
    v_prev: &GridDensity,
    tau: f64,
    energy: &EnergyFunctional,
) -> Result<f64> {
    if candidate.domain() != v_prev.domain() {
        return Err(Error::Config(
            "candidate and previous state live on different domains".into(),
        ));
    }
    let prev = map_from_density(v_prev, candidate.intervals())?;
    if prev.masses() != candidate.masses() {
        return Err(Error::Config(
            "candidate must use uniform mass levels".into(),
        ));
    }
    let mut problem = StepProblem::new(energy, &prev, tau, v_prev.len());
    let v = problem.value(candidate.positions(), None);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation("penalized objective".into()))
    }
}

fn step_from_map(
    prev: &TransportMap,
    cells: usize,
    cfg: &JkoConfig,
) -> Result<(TransportMap, StepDiagnostics)> {
    let domain = prev.domain();
    let mut problem = StepProblem::new(&cfg.energy, prev, cfg.tau, cells);
    // a hair above the admissible gap so that rounding in the projection
    // cannot produce an inadmissible map
    let bounds = MonotoneBox {
        lo: domain.lo,
        hi: domain.hi,
        gap: TransportMap::min_gap(domain) * (1.0 + 1e-6),
    };
    let scaling: Vec<f64> = problem.weights.iter().map(|w| w / cfg.tau).collect();
    let opts = Options {
        max_iter: cfg.inner_max_iter,
        rel_tol: cfg.inner_tol,
    };
    let out = minimize(
        &mut problem,
        prev.positions().to_vec(),
        &bounds,
        &scaling,
        &opts,
    );
    if !out.value.is_finite() {
        return Err(Error::Evaluation("JKO objective".into()));
    }
    let transport_cost = problem.transport_cost(&out.x);
    let map = TransportMap::new(domain, prev.masses().to_vec(), out.x)?;
    Ok((
        map,
        StepDiagnostics {
            objective_start: out.start_value,
            objective_end: out.value,
            transport_cost,
            iterations: out.iterations,
            converged: out.converged,
        },
    ))
}

/// One minimizing-movement step from `v_prev`.
pub fn jko_step(v_prev: &GridDensity, cfg: &JkoConfig) -> Result<(GridDensity, StepDiagnostics)> {
    cfg.validate_for_grid(v_prev.len())?;
    let prev = map_from_density(v_prev, cfg.map_nodes)?;
    let (map, diag) = step_from_map(&prev, v_prev.len(), cfg)?;
    Ok((density_from_map(&map, v_prev.len())?, diag))
}

/// Runs `cfg.n_steps` steps from `u0`.
pub fn run(u0: &GridDensity, cfg: &JkoConfig) -> Result<JkoTrajectory> {
    cfg.validate_for_grid(u0.len())?;
    let cells = u0.len();
    let mut map = map_from_density(u0, cfg.map_nodes)?;
    let mut states = vec![u0.clone()];
    let mut energies = vec![cfg.energy.value(u0)?];
    let mut entropies = vec![boltzmann_entropy(u0)];
    let mut profiles = vec![QuantileProfile::new(u0)];
    let mut step_distances = Vec::with_capacity(cfg.n_steps);
    let mut steps = Vec::with_capacity(cfg.n_steps);
    for n in 1..=cfg.n_steps {
        let (next_map, diag) = if cfg.corrupt_step == Some(n) {
            let e = cfg.energy.value(&density_from_map(&map, cells)?)?;
            let skipped = StepDiagnostics {
                objective_start: e,
                objective_end: e,
                transport_cost: 0.0,
                iterations: 0,
                converged: false,
            };
            (map.clone(), skipped)
        } else {
            step_from_map(&map, cells, cfg)?
        };
        map = next_map;
        let u = density_from_map(&map, cells)?;
        let profile = QuantileProfile::new(&u);
        step_distances.push(profile.distance(profiles.last().unwrap())?);
        profiles.push(profile);
        energies.push(cfg.energy.value(&u)?);
        entropies.push(boltzmann_entropy(&u));
        states.push(u);
        steps.push(diag);
    }
    Ok(JkoTrajectory {
        energy_name: cfg.energy.name().to_string(),
        tau: cfg.tau,
        map_nodes: cfg.map_nodes,
        inner_tol: cfg.inner_tol,
        times: (0..=cfg.n_steps).map(|n| n as f64 * cfg.tau).collect(),
        energies,
        entropies,
        step_distances,
        steps,
        states,
    })
}
