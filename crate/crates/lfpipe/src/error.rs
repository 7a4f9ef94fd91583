//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid refocus shift: {0}")]
    InvalidShift(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row length {len} is not divisible by micro image size {m}")]
    LengthNotDivisible { len: usize, m: u32 },

    #[error("lightfield geometry error: {0}")]
    Geometry(String),

    #[error("sum-only precision requires samples <= {limit}, found {found}")]
    SumOnlyOverflow { limit: u32, found: u32 },

    #[error("input supplied after end of stream")]
    InputAfterEnd,

    #[error("image format error: {0}")]
    Format(String),

    #[error("metadata mismatch: {0}")]
    MetaMismatch(String),

    #[error("synthetic disparity {disparity} out of range for frame width {width}")]
    DisparityOutOfRange { disparity: i64, width: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
