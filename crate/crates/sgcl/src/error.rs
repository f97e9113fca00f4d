//! Error types shared across the crate.
//!
//! Every error maps to one of the CLI exit-code classes: config (1),
//! data (2), numeric (3), verification (4).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SgclError {
    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SgclError {
    /// CLI exit code class for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SgclError::Config(_) | SgclError::Usage(_) => 1,
            SgclError::Parse { .. }
            | SgclError::Dimension(_)
            | SgclError::Data(_)
            | SgclError::Io(_) => 2,
            SgclError::Numeric(_) => 3,
            SgclError::Verification(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, SgclError>;
