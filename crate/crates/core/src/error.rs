// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T, E = CpdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CpdError {
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("design error: {0}")]
    Design(String),
    #[error("every change location is degenerate; nothing to scan")]
    EmptyScan,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("training diverged: {0}")]
    Training(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CpdError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        CpdError::InvalidParameter(msg.into())
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        !matches!(
            self,
            CpdError::Training(_) | CpdError::Generation(_) | CpdError::Io(_)
        )
    }
}
