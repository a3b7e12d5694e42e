// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors produced by the detection library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input data is degenerate for the requested operation
    /// (e.g. a constant series where a noise scale must be estimated).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Failure reading or writing an external resource.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a cache or scenario file.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
