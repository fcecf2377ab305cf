use std::path::PathBuf;

use thiserror::Error;

use crate::solver::PicardTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("operation needs a grid with split_index = n-1")]
    MissingSplit,

    #[error("multi-index has length {found}, expected {expected}")]
    MultiIndexLength { expected: usize, found: usize },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("time {0} is not a snapshot time of the trajectory")]
    TimeOffGrid(f64),

    #[error("random draw degenerated to zero twice")]
    DegenerateDraw,

    #[error("inputs are not band-limited enough for an alias-free cubic product: {0}")]
    AliasingOverflow(String),

    #[error("ratio denominator vanishes")]
    ZeroDenominator,

    #[error("numerical abort at t = {time}: {reason}")]
    NumericalAbort { time: f64, reason: String },

    #[error("Picard iteration did not converge in {} iterations (last ratio {:?})", .0.iterations, .0.ratios.last())]
    NonConvergence(Box<PicardTrace>),

    #[error("eigen-table: {0}")]
    EigenTable(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
