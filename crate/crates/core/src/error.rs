use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion norm is zero or underflows (norm^2 = {0:e})")]
    ZeroNorm(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("kernel {kernel:?} larger than padded input {input:?}")]
    KernelLargerThanInput { kernel: (usize, usize), input: (usize, usize) },

    #[error("invalid fan: fan_in = {fan_in}, fan_out = {fan_out}")]
    InvalidFan { fan_in: usize, fan_out: usize },

    #[error("invalid dropout rate {0}, expected 0 <= rate < 1")]
    InvalidRate(f64),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("target of length {target} needs {required} frames, only {frames} available")]
    ImpossibleTarget {
        target: usize,
        required: usize,
        frames: usize,
    },

    #[error("enumeration of {0} paths exceeds the brute-force bound")]
    TooLarge(u128),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("truncated file: {0}")]
    TruncatedFile(String),

    #[error("audio too short: {samples} samples, need at least {needed}")]
    AudioTooShort { samples: usize, needed: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss in batch {batch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::InvalidFan { .. } | Error::InvalidRate(_) => {
                ErrorKind::Usage
            }
            Error::ZeroNorm(_) | Error::NonFiniteLoss { .. } | Error::NonScalarLoss(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
