use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("negative time t = {0}")]
    NegativeTime(f64),

    #[error("operation not supported for this model variant: {0}")]
    UnsupportedVariant(&'static str),

    #[error("time t = {0} outside the tabulated range")]
    OutOfTable(f64),

    #[error("correlation table does not decay at the grid end (|value| = {0})")]
    UndecayedTable(f64),

    #[error("exact rate diverges near t = {0}: |c1(t)| below threshold")]
    RateDivergence(f64),

    #[error("GME population vanishes near t = {0}: rate undefined")]
    GmePopulationZero(f64),

    #[error("quadrature did not converge after refinement cap (last change {0:.3e})")]
    QuadratureNonConvergence(f64),

    #[error("negative rate gamma = {gamma} at t = {t}; use a time-local generator instead of the Lindblad form")]
    NegativeRate { t: f64, gamma: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("trajectory configuration rejected: {0}")]
    ConfigRejected(String),

    #[error("propagation unstable at t = {0}: entry magnitude exceeded 1e6")]
    StepInstability(f64),

    #[error("trajectory (seed {seed}, index {index}) aborted: {reason}")]
    TrajectoryAbort {
        seed: u64,
        index: u64,
        reason: String,
    },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
