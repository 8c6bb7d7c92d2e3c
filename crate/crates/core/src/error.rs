use std::io;

use thiserror::Error;

/// Everything that can go wrong while building a basis, calibrating or
/// running a test.
#[derive(Debug, Error)]
pub enum SstError {
    /// Invalid shapes, sizes or parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// The caller asked for something that cannot be done with the given data.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// An eigenvalue too small to divide by in the Nyström extension.
    #[error("eigenvalue {index} is degenerate ({value:e} below floor {floor:e})")]
    DegenerateEigenvalue { index: usize, value: f64, floor: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = SstError> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(SstError::Config(msg.into()))
}
