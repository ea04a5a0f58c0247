use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum OtError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("atoms of the two measures do not match")]
    AtomMismatch,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver overflow at lambda = {lambda}: {detail}")]
    Overflow { lambda: f64, detail: String },

    #[error("unsupported on this backend: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
