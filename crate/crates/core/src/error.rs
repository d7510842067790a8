use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by meshing, assembly, solvers and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("unsupported limit: {0} has no standard biharmonic limit")]
    UnsupportedLimit(String),

    #[error("assembly failed on element {element}: {reason}")]
    Assembly { element: usize, reason: String },

    #[error("singular system: zero pivot at row {row} (value {pivot:e})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("eigensolver did not converge after {iterations} restarts ({converged} of {requested} pairs converged)")]
    Convergence {
        iterations: usize,
        converged: usize,
        requested: usize,
        partial: Box<crate::eigen::EigResult>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
