use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value fell outside the domain an operation requires.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty dataset")]
    EmptyData,

    #[error("empty posterior draws")]
    EmptyDraws,

    /// MCMC did not produce an acceptable fit (R-hat or acceptance check).
    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown column: {0}")]
    UnknownColumn(String),

    #[error("failed to read {path}: {source}")]
    ReadFile {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    WriteFile {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: usage and input problems exit 2,
    /// internal and fit failures exit 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::DimensionMismatch { .. }
            | Error::EmptyData
            | Error::InvalidConfig(_)
            | Error::UnknownColumn(_)
            | Error::ReadFile { .. }
            | Error::Parse { .. }
            | Error::Csv(_) => 2,
            _ => 1,
        }
    }
}
