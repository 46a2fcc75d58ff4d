use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum TqcError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration failed at t = {time}: {msg}")]
    Integration { time: f64, msg: String },
    #[error("resource cap exceeded: {0}")]
    Resource(String),
    #[error("spectrum error: {0}")]
    Spectrum(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TqcError>;
