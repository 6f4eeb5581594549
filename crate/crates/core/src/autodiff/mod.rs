//! Dense-array math with a recorded operation tape for reverse-mode
//! gradients.
//!
//! The tape is rebuilt on every forward pass (define-by-run). All values
//! are 64-bit floats; gradient checks at lower precision are unreliable
//! at the tolerances the test suites assert.

mod check;
mod tape;
mod tensor;

pub use check::{grad_check, grad_check_multi};
pub use tape::{GradMap, NodeId, OpKind, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("{op}: shape mismatch: {details}")]
    ShapeMismatch { op: &'static str, details: String },
    #[error("{op}: non-finite value produced")]
    NumericOverflow { op: &'static str },
    #[error("{op}: input tensor is not recorded on this tape")]
    NotOnTape { op: &'static str },
    #[error("backward target must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("grad_check: step size must be positive, got {0}")]
    BadStepSize(f64),
}

pub type AdResult<T> = Result<T, AdError>;
