use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid norm specification: {0}")]
    InvalidNormSpec(String),

    #[error("restriction region selects no cubes")]
    EmptyRestriction,

    #[error("box of size {1} too small: {0}")]
    BoxTooSmall(String, f64),

    #[error("invalid problem specification: {0}")]
    InvalidProblem(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("solution blew up at t = {time}: {detail}")]
    BlowUp { time: f64, detail: String },

    #[error("iterative solve failed to converge: {0}")]
    SolveFailed(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid covering request: {0}")]
    InvalidCovering(String),

    #[error("sample too small: {0}")]
    SampleTooSmall(String),

    #[error("incompatible operands: {0}")]
    Incompatible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
