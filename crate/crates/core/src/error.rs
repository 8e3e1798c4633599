use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("monotonicity violated at node {index}: gap {gap:e} below {min_gap:e}")]
    Monotonicity {
        index: usize,
        gap: f64,
        min_gap: f64,
    },

    #[error("degenerate quantile: {0}")]
    DegenerateQuantile(String),

    #[error("perturbation step too large: {0}")]
    StepTooLarge(String),

    #[error("non-finite value while evaluating {0}")]
    Evaluation(String),

    #[error("mobility is degenerate at zero density and no limit for z f'(z) was supplied")]
    MobilityDegeneracy,

    #[error("invalid mobility: {0}")]
    InvalidMobility(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
