//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("signature error: {0}")]
    Signature(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical failure at t = {t}: {msg}")]
    Numerical { t: f64, msg: String },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
