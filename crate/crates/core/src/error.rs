use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the fusion library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },

    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("cannot write {path}: {reason}")]
    Unwritable { path: PathBuf, reason: String },

    #[error("zero-sized image")]
    EmptyImage,

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image {width}x{height} is too small: {reason}")]
    TooSmall {
        width: usize,
        height: usize,
        reason: String,
    },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("masks are not complementary at pixel ({x}, {y})")]
    NonComplementaryMasks { x: usize, y: usize },

    #[error("expected {expected} input images, got {found}")]
    Arity { expected: usize, found: usize },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
}

pub type Result<T> = std::result::Result<T, Error>;
