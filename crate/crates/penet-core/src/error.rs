//! Error type shared by the tensor kernels, the pyramid, and the model.

use thiserror::Error;

/// Errors raised by tensor construction, the numeric operators, the pyramid
/// and the model forward/backward passes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("data length {len} does not match shape {channels}x{height}x{width}")]
    DataLength {
        len: usize,
        channels: usize,
        height: usize,
        width: usize,
    },

    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("unsupported kernel size {0}: only 1x1 and 3x3 kernels are supported")]
    UnsupportedKernel(usize),

    #[error("pooling output size must be >= 1")]
    InvalidPoolSize,

    #[error("resize target must be >= 1 in both dimensions, got {out_h}x{out_w}")]
    InvalidResizeTarget { out_h: usize, out_w: usize },

    #[error("channel group sizes sum to {got}, tensor has {expected} channels")]
    GroupSizeMismatch { expected: usize, got: usize },

    #[error("height and width must both be >= 2 to downsample, got {height}x{width}")]
    DegenerateDims { height: usize, width: usize },

    #[error("image {height}x{width} is too small: at least {min}x{min} is required")]
    ImageTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },

    #[error("pyramid level {level} has dims {got:?}, expected {expected:?}")]
    PyramidLevelDims {
        level: usize,
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("gradient seed shape {got:?} does not match output shape {expected:?}")]
    SeedShape {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
