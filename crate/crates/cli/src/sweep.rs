use crate::config::{InitialDatum, LagrangianChoice, RunConfig};
use crate::error::{CliError, Result};
use crate::execute::{execute, run_dir};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const SWEEP_SCHEMA: &str = "# gradflow-sweep v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Step size at a fixed horizon `tau * n_steps` of the template.
    Tau,
    /// Exponent of a power mobility.
    Alpha,
    /// Amplitude of a cosine initial datum.
    Eps,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Tau => "tau",
            Axis::Alpha => "alpha",
            Axis::Eps => "eps",
        }
    }
}

/// Parses `AXIS=v1,v2,...`; an empty value list is allowed.
pub fn parse_axis(spec: &str) -> Result<(Axis, Vec<f64>)> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("sweep {spec:?} is not AXIS=v1,v2,...")))?;
    let axis = match name.trim() {
        "tau" => Axis::Tau,
        "alpha" => Axis::Alpha,
        "eps" => Axis::Eps,
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep axis {other}; use tau, alpha or eps"
            )))
        }
    };
    let values = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| CliError::Config(format!("sweep value {v:?} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((axis, values))
}

/// The template with one axis value substituted.
pub fn variant(template: &RunConfig, axis: Axis, value: f64) -> Result<RunConfig> {
    let mut cfg = template.clone();
    match axis {
        Axis::Tau => {
            let horizon = template.tau * template.n_steps as f64;
            cfg.tau = value;
            cfg.n_steps = (horizon / value).round() as usize;
        }
        Axis::Alpha => match &mut cfg.lagrangian {
            LagrangianChoice::PowerMobility { alpha, .. } => *alpha = value,
            _ => {
                return Err(CliError::Config(
                    "an alpha sweep needs a power_mobility lagrangian".into(),
                ))
            }
        },
        Axis::Eps => match &mut cfg.initial {
            InitialDatum::CosinePerturbation { eps, .. } => *eps = value,
            _ => {
                return Err(CliError::Config(
                    "an eps sweep needs a cosine_perturbation initial datum".into(),
                ))
            }
        },
    }
    Ok(cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    pub tau: f64,
    pub n_steps: usize,
    /// `ok`, `certificate_failure`, `config_error` or `runtime_error`.
    pub status: &'static str,
    pub final_energy: Option<f64>,
    pub path_length: Option<f64>,
    /// Smallest slack in units of its tolerance over all reports.
    pub worst_normalized_slack: Option<f64>,
    pub weak_residual: Option<f64>,
    pub message: String,
}

impl SweepRow {
    pub fn exit_code(&self) -> u8 {
        match self.status {
            "ok" => 0,
            "certificate_failure" => 1,
            "config_error" => 2,
            _ => 3,
        }
    }
}

fn sweep_row(template: &RunConfig, axis: Axis, value: f64, out: &Path) -> SweepRow {
    let mut row = SweepRow {
        axis: axis.name(),
        value,
        tau: template.tau,
        n_steps: template.n_steps,
        status: "config_error",
        final_energy: None,
        path_length: None,
        worst_normalized_slack: None,
        weak_residual: None,
        message: String::new(),
    };
    let outcome = variant(template, axis, value).and_then(|cfg| {
        row.tau = cfg.tau;
        row.n_steps = cfg.n_steps;
        let assumptions = cfg.validate()?;
        execute(&cfg, &assumptions, out)
    });
    match outcome {
        Ok(o) => {
            row.status = if o.passed() {
                "ok"
            } else {
                "certificate_failure"
            };
            row.final_energy = Some(o.summary.final_energy);
            row.path_length = Some(o.summary.path_length);
            row.worst_normalized_slack = o.worst_normalized_slack();
            row.weak_residual = o.summary.weak_residual;
            row.message = o
                .summary
                .certificates
                .iter()
                .filter(|c| c.failed > 0)
                .map(|c| format!("{} failed {}/{}", c.name, c.failed, c.checks))
                .collect::<Vec<_>>()
                .join("; ");
        }
        Err(e) => {
            row.status = if e.exit_code() == 2 {
                "config_error"
            } else {
                "runtime_error"
            };
            row.message = e.to_string();
        }
    }
    row
}

/// One run per value, in parallel, each in its own directory under `out`.
/// Failed runs are recorded in their row and do not stop the sweep.
pub fn sweep(template: &RunConfig, axis: Axis, values: &[f64], out: &Path) -> Vec<SweepRow> {
    values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| sweep_row(template, axis, v, &run_dir(out, axis.name(), i)))
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let io_err = |source: std::io::Error| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    writeln!(file, "{SWEEP_SCHEMA}").map_err(io_err)?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| io_err(e.into());
    w.write_record([
        "axis",
        "value",
        "tau",
        "n_steps",
        "status",
        "final_energy",
        "path_length",
        "worst_normalized_slack",
        "weak_residual",
        "message",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.axis.to_string(),
            r.value.to_string(),
            r.tau.to_string(),
            r.n_steps.to_string(),
            r.status.to_string(),
            cell(r.final_energy),
            cell(r.path_length),
            cell(r.worst_normalized_slack),
            cell(r.weak_residual),
            r.message.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template() -> RunConfig {
        serde_json::from_str(
            r#"{"lagrangian": {"name": "power_mobility", "alpha": 0.5},
                "grid_cells": 32, "map_nodes": 32, "tau": 1e-3, "n_steps": 4,
                "certificates": ["supE", "sumw2"]}"#,
        )
        .unwrap()
    }

    #[test]
    fn axis_parsing() {
        assert_eq!(
            parse_axis("tau=1e-3, 5e-4").unwrap(),
            (Axis::Tau, vec![1e-3, 5e-4])
        );
        assert_eq!(parse_axis("eps=").unwrap(), (Axis::Eps, vec![]));
        assert!(parse_axis("beta=1").is_err());
        assert!(parse_axis("tau").is_err());
        assert!(parse_axis("tau=x").is_err());
    }

    #[test]
    fn tau_axis_keeps_the_horizon() {
        let c = variant(&template(), Axis::Tau, 2.5e-4).unwrap();
        assert_eq!(c.n_steps, 16);
    }

    #[test]
    fn axis_must_match_the_template() {
        assert!(variant(&template(), Axis::Eps, 0.1).is_ok());
        let mut t = template();
        t.lagrangian = LagrangianChoice::ThinFilm;
        assert!(variant(&t, Axis::Alpha, 0.5).is_err());
    }

    #[test]
    fn bad_values_are_recorded_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sweep(&template(), Axis::Alpha, &[0.3, 1.5], dir.path());
        assert_eq!(rows[0].status, "ok");
        assert_eq!(rows[1].status, "config_error");
        assert!(rows[1].message.contains("window"));
        assert!(sweep(&template(), Axis::Alpha, &[], dir.path()).is_empty());
    }
}
