use std::path::PathBuf;

/// Errors raised by weight construction, quadrature and the evaluators.
///
/// Infinite condition values are not errors: they travel as `f64::INFINITY`
/// under the conventions in [`crate::numerics::ext`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("tail of the weight is not positive at r = {r} (value {value})")]
    NonPositiveTail { r: f64, value: f64 },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("|a| = {a} exceeds the certified kernel radius {a_max}")]
    Radius { a: f64, a_max: f64 },

    #[error("the averaging operator is undefined at the origin")]
    Origin,

    #[error("kernel truncation failed: {0}")]
    Truncation(String),

    #[error("parameter out of admissible range: {0}")]
    Range(String),

    #[error("degenerate test family: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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
