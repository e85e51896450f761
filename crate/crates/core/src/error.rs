use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("coordinate {value} exceeds the lattice bound {bound}")]
    CoordinateOverflow { value: i128, bound: i64 },

    #[error("invalid spectral box: {0}")]
    InvalidBox(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("frequency {frequency} on axis {axis} is outside the Nyquist box of a grid with {size} samples")]
    Aliasing {
        axis: usize,
        frequency: i64,
        size: usize,
    },

    #[error("spectrum leaves the truncation window at {0}")]
    OutsideWindow(String),

    #[error("polynomial is not real-valued")]
    NotReal,

    #[error("polynomial is not analytic under the chosen order")]
    NotAnalytic,

    #[error("empty basis: {0}")]
    EmptyBasis(String),

    #[error("power iteration did not converge in {iterations} iterations (estimate {estimate}, residual {residual})")]
    NonConvergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("atom: {0}")]
    Atom(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
