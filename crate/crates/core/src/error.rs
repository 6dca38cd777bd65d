use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NvxError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unstable filter design: max pole magnitude {0}")]
    UnstableFilter(f64),

    #[error("rank deficient: requested {requested} components, achievable rank is {achievable}")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = NvxError> = std::result::Result<T, E>;

pub(crate) fn shape_err(msg: impl Into<String>) -> NvxError {
    NvxError::Shape(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> NvxError {
    NvxError::InvalidArgument(msg.into())
}
