// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced by the codec, decoder and metrics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("object mask is empty")]
    EmptyObject,
    #[error("degenerate object: {0}")]
    DegenerateObject(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("contour invariant violated: {0}")]
    InvariantViolation(String),
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("shape generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
