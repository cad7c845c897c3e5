//! Crate-wide error type with the exit-code classes used by the CLI.

use thiserror::Error;

/// Errors surfaced by the library. The CLI maps each class to a fixed exit
/// code: input errors to 2, capacity errors to 3, cannot-encode errors to 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (bad file, unknown variable, missing
    /// value, invalid configuration).
    #[error("input error: {0}")]
    Input(String),

    /// A request exceeds a configured capacity bound (too many free variables,
    /// too many variables for the exact solver).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// The model assigns zero probability to a data world, so the data cannot
    /// be encoded under it.
    #[error("model cannot encode data: {0}")]
    CannotEncode(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Capacity(_) => 3,
            Error::CannotEncode(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
