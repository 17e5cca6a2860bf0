use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A composition with a vanishing component where the open simplex is required.
    #[error("singular composition: {0}")]
    SingularComposition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular linear system: pivot {pivot:e} in column {column} of {size}")]
    Singular {
        column: usize,
        size: usize,
        pivot: f64,
    },

    #[error(
        "inner iteration did not converge at t = {t}: {iterations} iterations, |zeta|_inf = {zeta_inf:e}"
    )]
    NotConverged {
        t: f64,
        iterations: usize,
        zeta_inf: f64,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
