//! Configuration-driven runner for minimizing-movement trajectories and their
//! certificates.

pub mod config;
pub mod error;
pub mod execute;
pub mod sweep;

pub use config::{load_config, read_config, RunConfig};
pub use error::{CliError, Result};
pub use execute::{execute, RunOutcome};
pub use sweep::{parse_axis, sweep, write_sweep, Axis, SweepRow};
