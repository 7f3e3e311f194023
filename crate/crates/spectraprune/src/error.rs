//! Crate-wide error type.

use thiserror::Error;

use crate::npy::NpyError;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two operands have incompatible shapes.
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    /// A tensor constructor saw NaN or infinity.
    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),

    /// Iterative decomposition did not reach its tolerance.
    #[error("SVD of a {rows}x{cols} matrix failed to converge after {sweeps} sweeps")]
    NoConvergence {
        rows: usize,
        cols: usize,
        sweeps: usize,
    },

    /// NPY parse/format failure.
    #[error(transparent)]
    Npy(#[from] NpyError),

    /// I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
