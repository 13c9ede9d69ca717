//! Error classes mapped to distinct process exit codes.

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_ENDPOINT: i32 = 4;

/// Top-level failure, classified by what the operator must fix.
#[derive(Debug, Error)]
pub enum AppError {
    /// Missing credential, unusable flag value, unwritable cache dir.
    #[error("{0}")]
    Config(String),
    /// Unreadable or malformed input files.
    #[error("{0}")]
    Input(String),
    /// Endpoint kept failing after retries.
    #[error("{0}")]
    Endpoint(String),
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        AppError::Input(msg.into())
    }

    pub fn endpoint(msg: impl Into<String>) -> Self {
        AppError::Endpoint(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => EXIT_CONFIG,
            AppError::Input(_) => EXIT_INPUT,
            AppError::Endpoint(_) => EXIT_ENDPOINT,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
