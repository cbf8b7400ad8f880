//! Crate-wide error type.
//!
//! Variants are grouped by how a caller should react: `Config`, `Infeasible`
//! and `Input` indicate a bad request (CLI exit code 2), the rest indicate a
//! fault while executing a valid request (CLI exit code 3). `Degenerate`
//! marks quantities that are undefined on the given data (empty parallel set,
//! constant correlation columns, zero errors) so callers can branch on it.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("infeasible config: {0}")]
    Infeasible(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("undefined on this data: {0}")]
    Degenerate(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("run fault: {0}")]
    Run(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code contract: 0 success, 2 configuration/input error, 3 run fault.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Infeasible(_) | Error::Input(_) | Error::Toml(_) => 2,
            _ => 3,
        }
    }
}
