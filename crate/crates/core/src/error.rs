use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed or inconsistent input row. `row` is 1-based and counts the header.
    #[error("{path}: row {row}: {message}")]
    Load {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("no ocean cell available")]
    NoOceanCell,

    #[error("sender at ({lon}, {lat}) is not an ocean cell")]
    SenderOnLand { lon: f64, lat: f64 },

    #[error("field coverage missing for days: {0}")]
    MissingCoverage(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("empty panel: {0}")]
    EmptyPanel(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("fixed-effect absorption did not converge after {iterations} iterations (max change {max_change:e})")]
    NoConvergence { iterations: usize, max_change: f64 },

    #[error("no usable regressor columns")]
    NoRegressors,

    #[error("cluster dimension `{0}` has a single cluster")]
    SingleCluster(String),

    #[error(
        "column `{column}` has {distinct} distinct values, fewer than {k} bins; use a smaller k"
    )]
    TooFewDistinct {
        column: String,
        distinct: usize,
        k: usize,
    },

    #[error("unknown regression preset `{name}`; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("config: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    Check(String),
}

impl Error {
    pub(crate) fn load(path: impl Into<PathBuf>, row: usize, message: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            row,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
