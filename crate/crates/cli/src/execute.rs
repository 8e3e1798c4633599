use crate::config::RunConfig;
use crate::error::{CliError, Result};
use gradflow::certificate::{worst, CertificateReport};
use gradflow::diagnostics::*;
use gradflow::jko::{refine_study, run, JkoTrajectory};
use gradflow::lagrangian::{dissipation_constants, LagrangianSpec, TemporalWeight, TestFunction};
use rayon::prelude::*;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const CERTIFICATE_SCHEMA: &str = "# gradflow-certificates v1";

/// Samples drawn by the `traceless` certificate.
const TRACELESS_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct CertificateSummary {
    pub name: String,
    pub checks: usize,
    pub failed: usize,
    pub worst_step: Option<usize>,
    pub worst_slack: f64,
    pub worst_normalized_slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub energy: String,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// `sum_n W2(u^{n-1}, u^n)`.
    pub path_length: f64,
    pub converged_steps: usize,
    pub steps: usize,
    /// Signed residual of the weak formulation with the default test pair.
    pub weak_residual: Option<f64>,
    pub certificates: Vec<CertificateSummary>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
struct Timings {
    run_seconds: f64,
    certificate_seconds: f64,
    refinement_seconds: f64,
}

#[derive(Serialize)]
struct TrajectoryDocument<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    trajectory: &'a JkoTrajectory,
}

#[derive(Serialize)]
struct RefinementDocument {
    taus: Vec<f64>,
    gaps: Vec<f64>,
    finest_over_coarsest: f64,
}

pub struct RunOutcome {
    pub summary: Summary,
    pub reports: Vec<CertificateReport>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    /// Smallest normalized slack over all reports.
    pub fn worst_normalized_slack(&self) -> Option<f64> {
        worst(&self.reports).map(|r| r.normalized_slack())
    }
}

/// Test pair for the weak formulation: `cos(2 pi x / L)` against a bump on
/// the middle 80% of the horizon.
fn weak_pair(traj: &JkoTrajectory) -> Option<(TestFunction, TemporalWeight)> {
    let horizon = traj.n_steps() as f64 * traj.tau;
    (traj.n_steps() >= 2).then(|| {
        (
            TestFunction::cosine(traj.domain(), 2.0),
            TemporalWeight::bump(0.1 * horizon, 0.9 * horizon),
        )
    })
}

fn evaluate(
    name: &str,
    cfg: &RunConfig,
    traj: &JkoTrajectory,
    assumptions: &[CertificateReport],
) -> Result<Vec<CertificateReport>> {
    let energy = cfg.energy();
    let thin_film = LagrangianSpec::thin_film();
    let reports = match name {
        "supE" => check_energy_monotone(traj),
        "sumw2" => vec![check_total_square_distance(traj, 1.0 + traj.inner_tol)],
        "w2cont" => check_holder(traj)?,
        "minimality" => check_minimality(traj),
        "apriori" => apriori_bounds(traj, &energy)?,
        "boundary" => traj
            .states
            .iter()
            .enumerate()
            .map(|(n, u)| {
                let mut r = boundary_sign_check(u);
                r.step = Some(n);
                r
            })
            .collect(),
        "assumptions" => assumptions.to_vec(),
        "traceless" => vec![traceless_sweep(TRACELESS_SAMPLES, 2..=10, cfg.seed)?.report],
        "addreg" => check_entropy_dissipation_a(traj, &thin_film),
        "addregf" => {
            let f = cfg
                .mobility()
                .expect("mobility certificate on a mobility run");
            let (_, delta) = dissipation_constants(&f, 1)?;
            check_entropy_dissipation_f(traj, &f, delta)
        }
        "dweak" => match weak_pair(traj) {
            Some((phi, eta)) => vec![check_discrete_weak_a(
                traj,
                &thin_film,
                &phi,
                &eta,
                WEAK_SLACK_FACTOR,
            )?],
            None => Vec::new(),
        },
        "dweakf" => match weak_pair(traj) {
            Some((phi, eta)) => {
                let f = cfg
                    .mobility()
                    .expect("mobility certificate on a mobility run");
                check_discrete_weak_f(traj, &f, &phi, &eta, cfg.beta, WEAK_SLACK_FACTOR)?
            }
            None => Vec::new(),
        },
        "dispheat" => {
            let u = &traj.states[0];
            vec![check_heat_dissipation(&thin_film, u, default_probe(u))?]
        }
        other => {
            return Err(CliError::Config(format!("unknown certificate {other}")));
        }
    };
    Ok(reports)
}

fn summarize(name: &str, reports: &[CertificateReport]) -> CertificateSummary {
    let w = worst(reports);
    CertificateSummary {
        name: name.to_string(),
        checks: reports.len(),
        failed: reports.iter().filter(|r| !r.pass).count(),
        worst_step: w.and_then(|r| r.step),
        worst_slack: w.map_or(f64::INFINITY, |r| r.slack),
        worst_normalized_slack: w.map_or(f64::INFINITY, |r| r.normalized_slack()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(std::io::Error::from)
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn write_certificates(path: &Path, reports: &[CertificateReport]) -> Result<()> {
    let io_err = |source: std::io::Error| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut file = create(path)?;
    writeln!(file, "{CERTIFICATE_SCHEMA}").map_err(io_err)?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| io_err(e.into());
    w.write_record([
        "certificate",
        "step",
        "lhs",
        "rhs",
        "slack",
        "tolerance",
        "pass",
    ])
    .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.step.map(|s| s.to_string()).unwrap_or_default(),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.slack),
            format!("{:e}", r.tolerance),
            r.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Runs the configured trajectory, evaluates the enabled certificates and
/// writes `trajectory.json`, `certificates.csv`, `summary.json` and
/// `timings.json` into `out`, plus `refinement.json` when a refinement study
/// is configured.
pub fn execute(
    cfg: &RunConfig,
    assumptions: &[CertificateReport],
    out: &Path,
) -> Result<RunOutcome> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Write {
        path: out.to_path_buf(),
        source,
    })?;
    let u0 = cfg.initial_density()?;

    let clock = Instant::now();
    let traj = run(&u0, &cfg.jko())?;
    let run_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let per_certificate: Vec<Vec<CertificateReport>> = cfg
        .certificates
        .par_iter()
        .map(|name| evaluate(name, cfg, &traj, assumptions))
        .collect::<Result<_>>()?;
    let certificate_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    if cfg.refine_levels >= 2 {
        let study = refine_study(&u0, &cfg.jko(), cfg.refine_levels)?;
        let doc = RefinementDocument {
            finest_over_coarsest: study.gaps.last().copied().unwrap_or(0.0)
                / study.gaps.first().copied().unwrap_or(1.0),
            taus: study.taus,
            gaps: study.gaps,
        };
        write_json(&out.join("refinement.json"), &doc)?;
    }
    let refinement_seconds = clock.elapsed().as_secs_f64();

    let weak_residual = match weak_pair(&traj) {
        Some((phi, eta)) => Some(weak_residual(&traj, &cfg.energy(), &phi, &eta)?),
        None => None,
    };
    let certificates: Vec<CertificateSummary> = cfg
        .certificates
        .iter()
        .zip(&per_certificate)
        .map(|(name, r)| summarize(name, r))
        .collect();
    let reports: Vec<CertificateReport> = per_certificate.into_iter().flatten().collect();
    let summary = Summary {
        config: cfg.clone(),
        energy: cfg.energy().name().to_string(),
        initial_energy: traj.energies[0],
        final_energy: *traj.energies.last().expect("initial energy"),
        path_length: traj.step_distances.iter().sum(),
        converged_steps: traj.steps.iter().filter(|s| s.converged).count(),
        steps: traj.n_steps(),
        weak_residual,
        passed: reports.iter().all(|r| r.pass),
        certificates,
    };

    write_json(
        &out.join("trajectory.json"),
        &TrajectoryDocument {
            config: cfg,
            trajectory: &traj,
        },
    )?;
    write_certificates(&out.join("certificates.csv"), &reports)?;
    write_json(&out.join("summary.json"), &summary)?;
    write_json(
        &out.join("timings.json"),
        &Timings {
            run_seconds,
            certificate_seconds,
            refinement_seconds,
        },
    )?;
    Ok(RunOutcome { summary, reports })
}

/// Directory for one run of a sweep.
pub fn run_dir(out: &Path, axis: &str, index: usize) -> PathBuf {
    out.join(format!("{axis}-{index:03}"))
}
