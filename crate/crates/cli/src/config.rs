use crate::error::{CliError, Result};
use gradflow::certificate::CertificateReport;
use gradflow::jko::JkoConfig;
use gradflow::lagrangian::{
    alpha_window, validate_assumption_a, validate_assumption_f, EnergyFunctional, LagrangianSpec,
    MobilitySamplingPlan, MobilitySpec, SamplingPlan,
};
use gradflow::transport::{GridDensity, Interval};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Certificates that apply to every energy.
const COMMON: &[&str] = &[
    "supE",
    "sumw2",
    "w2cont",
    "minimality",
    "apriori",
    "boundary",
    "assumptions",
    "traceless",
];
const LAGRANGIAN_ONLY: &[&str] = &["addreg", "dweak", "dispheat"];
const MOBILITY_ONLY: &[&str] = &["addregf", "dweakf"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LagrangianChoice {
    ThinFilm,
    PowerMobility {
        alpha: f64,
        #[serde(default = "one")]
        coefficient: f64,
    },
    SqrtMobility,
    /// `f(z) = sum c z^a` from a table of `[c, a]` rows.
    CustomTable {
        terms: Vec<(f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    Uniform,
    /// `1 + eps cos(k pi (x - lo) / L)`, normalized.
    CosinePerturbation {
        eps: f64,
        k: f64,
    },
    /// Gaussian profile, normalized.
    Bump {
        center: f64,
        width: f64,
    },
    /// Two-column CSV `x, u`, interpolated linearly at the cell midpoints.
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn default_domain() -> Interval {
    Interval::unit()
}

fn default_cells() -> usize {
    256
}

fn default_tau() -> f64 {
    1e-4
}

fn default_steps() -> usize {
    100
}

fn default_inner_tol() -> f64 {
    1e-10
}

fn default_inner_iter() -> usize {
    500
}

fn default_beta() -> f64 {
    1e-3
}

fn default_output() -> PathBuf {
    PathBuf::from("gradflow-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_domain")]
    pub domain: Interval,
    #[serde(default = "default_cells")]
    pub grid_cells: usize,
    #[serde(default = "default_cells")]
    pub map_nodes: usize,
    pub lagrangian: LagrangianChoice,
    #[serde(default = "default_initial")]
    pub initial: InitialDatum,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    /// Number of step sizes `tau, tau/2, ...` in the refinement study; 0 skips it.
    #[serde(default)]
    pub refine_levels: usize,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_inner_iter")]
    pub inner_max_iter: usize,
    /// Certificates to evaluate; empty selects every applicable one.
    #[serde(default)]
    pub certificates: Vec<String>,
    /// Entropy weight in the mobility weak formulation.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Test hook: skip the minimization at this step.
    #[serde(default)]
    pub corrupt_step: Option<usize>,
}

fn default_initial() -> InitialDatum {
    InitialDatum::CosinePerturbation { eps: 0.5, k: 2.0 }
}

impl RunConfig {
    pub fn is_mobility(&self) -> bool {
        !matches!(self.lagrangian, LagrangianChoice::ThinFilm)
    }

    pub fn mobility(&self) -> Option<MobilitySpec> {
        match &self.lagrangian {
            LagrangianChoice::ThinFilm => None,
            LagrangianChoice::PowerMobility { alpha, coefficient } => {
                Some(MobilitySpec::power(*coefficient, *alpha))
            }
            LagrangianChoice::SqrtMobility => Some(MobilitySpec::sqrt()),
            LagrangianChoice::CustomTable { terms } => Some(MobilitySpec::power_sum(terms.clone())),
        }
    }

    pub fn energy(&self) -> EnergyFunctional {
        match self.mobility() {
            Some(f) => EnergyFunctional::Mobility(f),
            None => EnergyFunctional::Lagrangian(LagrangianSpec::thin_film()),
        }
    }

    pub fn jko(&self) -> JkoConfig {
        JkoConfig {
            inner_tol: self.inner_tol,
            inner_max_iter: self.inner_max_iter,
            map_nodes: self.map_nodes,
            corrupt_step: self.corrupt_step,
            ..JkoConfig::new(self.energy(), self.tau, self.n_steps)
        }
    }

    /// Every certificate that applies to the configured energy.
    pub fn applicable_certificates(&self) -> Vec<String> {
        let specific = if self.is_mobility() {
            MOBILITY_ONLY
        } else {
            LAGRANGIAN_ONLY
        };
        COMMON
            .iter()
            .chain(specific)
            .map(|s| s.to_string())
            .collect()
    }

    pub fn initial_density(&self) -> Result<GridDensity> {
        let d = self.domain;
        let m = self.grid_cells;
        let u = match &self.initial {
            InitialDatum::Uniform => GridDensity::uniform(d, m)?,
            InitialDatum::CosinePerturbation { eps, k } => {
                let values = (0..m)
                    .map(|j| {
                        let x = (j as f64 + 0.5) / m as f64;
                        1.0 + eps * (k * PI * x).cos()
                    })
                    .collect();
                GridDensity::normalized(d, values)?
            }
            InitialDatum::Bump { center, width } => {
                let values = (0..m)
                    .map(|j| {
                        let x = d.lo + (j as f64 + 0.5) * d.length() / m as f64;
                        (-((x - center) / width).powi(2)).exp()
                    })
                    .collect();
                GridDensity::normalized(d, values)?
            }
            InitialDatum::File { path } => read_datum(path, d, m)?,
        };
        Ok(u)
    }

    /// Checks ranges and names, then runs the assumption validators.
    pub fn validate(&self) -> Result<Vec<CertificateReport>> {
        Interval::new(self.domain.lo, self.domain.hi)
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.jko()
            .validate_for_grid(self.grid_cells)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.refine_levels == 1 {
            return Err(CliError::Config(
                "refine_levels must be 0 or at least 2".into(),
            ));
        }
        if !(self.beta > 0.0) {
            return Err(CliError::Config("beta must be positive".into()));
        }
        let applicable = self.applicable_certificates();
        for c in &self.certificates {
            if !applicable.contains(c) {
                return Err(CliError::Config(format!(
                    "certificate {c} does not apply to {}; choose from {}",
                    self.energy().name(),
                    applicable.join(", ")
                )));
            }
        }
        match &self.initial {
            InitialDatum::CosinePerturbation { eps, .. } if !(eps.abs() < 1.0) => {
                return Err(CliError::Config(format!(
                    "cosine perturbation eps = {eps} must satisfy |eps| < 1"
                )))
            }
            InitialDatum::Bump { width, .. } if !(*width > 0.0) => {
                return Err(CliError::Config(format!(
                    "bump width {width} must be positive"
                )))
            }
            _ => {}
        }
        match &self.lagrangian {
            LagrangianChoice::PowerMobility { alpha, coefficient } => {
                let (lo, hi) = alpha_window(1)?;
                if !(*alpha > lo && *alpha < hi) {
                    return Err(CliError::Config(format!(
                        "power mobility exponent {alpha} outside the admissible window ({lo}, {hi})"
                    )));
                }
                if !(*coefficient > 0.0) {
                    return Err(CliError::Config(format!(
                        "power mobility coefficient {coefficient} must be positive"
                    )));
                }
            }
            LagrangianChoice::CustomTable { terms } => {
                if terms.is_empty() || terms.iter().any(|&(c, a)| !(c > 0.0 && a > 0.0 && a < 1.0))
                {
                    return Err(CliError::Config(
                        "custom table needs rows [c, a] with c > 0 and 0 < a < 1".into(),
                    ));
                }
            }
            _ => {}
        }
        let reports = match self.mobility() {
            Some(f) => validate_assumption_f(&f, 1, &MobilitySamplingPlan::default())?,
            None => validate_assumption_a(
                &LagrangianSpec::thin_film(),
                &SamplingPlan {
                    seed: self.seed,
                    ..SamplingPlan::for_domain(self.domain)
                },
            ),
        };
        let failed: Vec<&str> = reports
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.as_str())
            .collect();
        if !failed.is_empty() {
            return Err(CliError::Config(format!(
                "{} violates assumption clauses: {}",
                self.energy().name(),
                failed.join(", ")
            )));
        }
        Ok(reports)
    }

    /// The config with every default spelled out, as echoed into the outputs.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if c.certificates.is_empty() {
            c.certificates = c.applicable_certificates();
        }
        c
    }
}

/// Parses a config file without validating it.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    // relative datum paths are taken from the config's directory
    if let InitialDatum::File { path: p } = &mut cfg.initial {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

/// Parses and validates a config file. Returns the config with defaults
/// resolved and the assumption-validator reports.
pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<CertificateReport>)> {
    let cfg = read_config(path)?;
    let reports = cfg.validate()?;
    Ok((cfg.resolved(), reports))
}

fn read_datum(path: &Path, domain: Interval, m: usize) -> Result<GridDensity> {
    let bad = |reason: String| CliError::Datum {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != 2 {
            return Err(bad(format!("row {} has {} columns", i + 1, record.len())));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(x), Ok(u)) => points.push((x, u)),
            // a header row
            _ if i == 0 => continue,
            _ => return Err(bad(format!("row {} is not numeric", i + 1))),
        }
    }
    if points.len() < 2 {
        return Err(bad("need at least two rows".into()));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(bad("x must be strictly increasing".into()));
    }
    if points.iter().any(|p| !(p.1 >= 0.0 && p.1.is_finite())) {
        return Err(bad("density values must be finite and nonnegative".into()));
    }
    let values = (0..m)
        .map(|j| {
            let x = domain.lo + (j as f64 + 0.5) * domain.length() / m as f64;
            let k = points.partition_point(|p| p.0 <= x);
            if k == 0 {
                points[0].1
            } else if k == points.len() {
                points[k - 1].1
            } else {
                let ((x0, u0), (x1, u1)) = (points[k - 1], points[k]);
                u0 + (u1 - u0) * (x - x0) / (x1 - x0)
            }
        })
        .collect();
    GridDensity::normalized(domain, values).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> RunConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(r#"{"lagrangian": {"name": "thin_film"}}"#);
        assert_eq!((c.grid_cells, c.map_nodes, c.tau), (256, 256, 1e-4));
        c.validate().unwrap();
        assert_eq!(c.resolved().certificates, c.applicable_certificates());
    }

    #[test]
    fn power_mobility_window() {
        let c = parse(r#"{"lagrangian": {"name": "power_mobility", "alpha": 0.1}}"#);
        c.validate().unwrap();
        let c = parse(r#"{"lagrangian": {"name": "power_mobility", "alpha": 1.2}}"#);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(
            serde_json::from_str::<RunConfig>(r#"{"lagrangian": {"name": "porous"}}"#).is_err()
        );
        assert!(serde_json::from_str::<RunConfig>(
            r#"{"lagrangian": {"name": "thin_film"}, "grid": 3}"#
        )
        .is_err());
        let c = parse(r#"{"lagrangian": {"name": "sqrt_mobility"}, "certificates": ["addreg"]}"#);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn coarse_grid_under_fine_map_is_rejected() {
        let c = parse(r#"{"lagrangian": {"name": "thin_film"}, "grid_cells": 64}"#);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn custom_table_builds_a_power_sum() {
        let c = parse(
            r#"{"lagrangian": {"name": "custom_table", "terms": [[1.0, 0.5], [0.5, 0.75]]}}"#,
        );
        c.validate().unwrap();
        let f = c.mobility().unwrap();
        assert!((f.value(4.0) - (2.0 + 0.5 * 4f64.powf(0.75))).abs() < 1e-12);
    }

    #[test]
    fn initial_data_have_unit_mass() {
        for init in [
            r#"{"name": "uniform"}"#,
            r#"{"name": "cosine_perturbation", "eps": 0.3, "k": 3}"#,
            r#"{"name": "bump", "center": 0.4, "width": 0.1}"#,
        ] {
            let c = parse(&format!(
                r#"{{"lagrangian": {{"name": "thin_film"}}, "initial": {init}, "domain": {{"lo": 0.0, "hi": 2.0}}}}"#
            ));
            let u = c.initial_density().unwrap();
            assert!((u.mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn datum_file_is_interpolated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(&path, "x,u\n0.0,1.0\n1.0,3.0\n").unwrap();
        let u = read_datum(&path, Interval::unit(), 8).unwrap();
        // 1 + 2x at the midpoints, normalized by its mass 2
        assert!((u.values()[0] - (1.0 + 2.0 / 16.0) / 2.0).abs() < 1e-14);
        std::fs::write(&path, "0.0,1.0\n0.5,-1.0\n").unwrap();
        assert!(matches!(
            read_datum(&path, Interval::unit(), 8),
            Err(CliError::Datum { .. })
        ));
    }
}
