use clap::Parser;
use gradflow_cli::{execute, read_config, sweep, Result, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs a minimizing-movement trajectory from a JSON config and checks the
/// discrete a priori estimates along it.
///
/// Exit status: 0 when every enabled certificate passes, 1 on a certificate
/// failure, 2 on a configuration error, 3 on a runtime error.
#[derive(Debug, Parser)]
#[command(name = "gradflow", version)]
struct Args {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time step override.
    #[arg(long)]
    tau: Option<f64>,
    /// Step count override.
    #[arg(long)]
    steps: Option<usize>,
    /// Evaluate every certificate that applies to the energy.
    #[arg(long, conflicts_with = "check")]
    check_all: bool,
    /// Evaluate only the named certificates.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    check: Vec<String>,
    /// Parameter sweep, e.g. `tau=1e-3,5e-4,2.5e-4`; axes are tau, alpha and eps.
    #[arg(long, value_name = "AXIS=V1,V2,...")]
    sweep: Option<String>,
    /// Seed for the randomized checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Test mode: skip the minimization halfway through the run.
    #[arg(long)]
    inject_corruption: bool,
}

fn configure(args: &Args) -> Result<RunConfig> {
    let mut cfg = read_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(tau) = args.tau {
        cfg.tau = tau;
    }
    if let Some(steps) = args.steps {
        cfg.n_steps = steps;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.check_all {
        cfg.certificates = cfg.applicable_certificates();
    } else if !args.check.is_empty() {
        cfg.certificates = args.check.clone();
    }
    if args.inject_corruption && cfg.n_steps > 0 {
        cfg.corrupt_step = Some((cfg.n_steps / 2).max(1));
    }
    Ok(cfg)
}

fn single_run(cfg: RunConfig) -> Result<u8> {
    let assumptions = cfg.validate()?;
    let cfg = cfg.resolved();
    let outcome = execute(&cfg, &assumptions, &cfg.output_dir)?;
    for c in &outcome.summary.certificates {
        println!(
            "{:<12} {:>5} checks {:>4} failed  worst slack {:.3e}",
            c.name, c.checks, c.failed, c.worst_slack
        );
    }
    println!(
        "energy {:.6e} -> {:.6e} over {} steps; outputs in {}",
        outcome.summary.initial_energy,
        outcome.summary.final_energy,
        outcome.summary.steps,
        cfg.output_dir.display()
    );
    Ok(if outcome.passed() { 0 } else { 1 })
}

fn sweep_run(cfg: RunConfig, spec: &str) -> Result<u8> {
    let (axis, values) = sweep::parse_axis(spec)?;
    if !values.is_empty() {
        // catches template-level mistakes once instead of in every row
        sweep::variant(&cfg, axis, values[0])?;
    }
    let cfg = cfg.resolved();
    let rows = sweep::sweep(&cfg, axis, &values, &cfg.output_dir);
    let path = cfg.output_dir.join("sweep.csv");
    sweep::write_sweep(&path, &rows)?;
    for r in &rows {
        println!("{}={:<10} {:<20} {}", r.axis, r.value, r.status, r.message);
    }
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(rows.iter().map(|r| r.exit_code()).max().unwrap_or(0))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure(&args).and_then(|cfg| match &args.sweep {
        Some(spec) => sweep_run(cfg, spec),
        None => single_run(cfg),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradflow_cli::CliError;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        let io = std::io::Error::other("disk full");
        assert_eq!(
            CliError::Write {
                path: "a".into(),
                source: io
            }
            .exit_code(),
            3
        );
        assert_eq!(
            CliError::Solver(gradflow::Error::Evaluation("F".into())).exit_code(),
            3
        );
    }

    #[test]
    fn flags_parse() {
        let a = Args::try_parse_from([
            "gradflow",
            "--config",
            "c.json",
            "--check",
            "supE,sumw2",
            "--sweep",
            "tau=1e-3",
        ])
        .unwrap();
        assert_eq!(a.check, ["supE", "sumw2"]);
        assert!(Args::try_parse_from([
            "gradflow",
            "--config",
            "c",
            "--check-all",
            "--check",
            "supE"
        ])
        .is_err());
        assert!(Args::try_parse_from(["gradflow"]).is_err());
    }
}
