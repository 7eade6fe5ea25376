use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("size overflow: {rows} x {cols}")]
    SizeOverflow { rows: u64, cols: u64 },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),

    #[error("not a compression operator: m = {m} > n = {n}")]
    NotCompression { m: usize, n: usize },
    #[error("spiral coverage {achieved:.4} not within tolerance of target {target:.4}")]
    CoverageUnreachable { target: f64, achieved: f64 },

    #[error("divergence at iteration {0}")]
    Divergence(usize),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("Nyquist violation: fs = {fs} Hz, need > {required} Hz")]
    Nyquist { fs: f64, required: f64 },
    #[error("delay {delay} s outside window of {window} s")]
    DelayOutOfWindow { delay: f64, window: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}
