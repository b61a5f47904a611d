use thiserror::Error;

use crate::grid::NormalImage;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum ReliefError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    /// The filter's weighted sum vanished at `count` pixels. `fallback` holds
    /// the filtered image with the input normal substituted at those pixels.
    #[error("weighted normal sum degenerate at {count} pixel(s)")]
    DegenerateSum { count: usize, fallback: Box<NormalImage> },

    #[error("detail layer is flat (maximum angle below 1e-12)")]
    FlatDetail,

    #[error("patch does not overlap the base image")]
    EmptyOverlap,

    #[error("diffusion step {step} exceeds the stability bound {bound}")]
    UnstableStep { step: f64, bound: f64 },

    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("domain has no foreground pixel")]
    EmptyDomain,

    #[error("foreground pixel ({x}, {y}) has no layer offset")]
    LabelGap { x: usize, y: usize },

    #[error("height field is constant over the foreground")]
    ConstantField,

    #[error("bad image format: {0}")]
    BadFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ReliefError {
    /// True for errors caused by bad user input rather than by a computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ReliefError::InvalidParameter(_)
                | ReliefError::DimensionMismatch { .. }
                | ReliefError::UnstableStep { .. }
                | ReliefError::BadFormat(_)
                | ReliefError::LabelGap { .. }
        )
    }
}

pub type Result<T, E = ReliefError> = std::result::Result<T, E>;
