//! Minimal differentiable-function core.
//!
//! Dense multilayer networks with exact analytic gradients, a bias-corrected
//! adaptive-moment optimizer, a central-difference gradient checker, and a
//! bit-exact parameter checkpoint format. Everything here is a pure function
//! of its inputs; training mutates state only by constructing new
//! [`ParamStore`] / [`AdamState`] values.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointEntry};
pub use gradcheck::{grad_check, GRAD_CHECK_FLOOR};
pub use mlp::{mlp_backward, mlp_forward, Activation, MlpSpec, ParamStore};
pub use tensor::Tensor;

use std::fmt;

/// Errors produced by the differentiable core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    /// A tensor or layer dimension did not match what the operation expects.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    /// A network specification violated its invariants.
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    /// A checkpoint file could not be parsed.
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Scalar trait for the math core: `f32` or `f64` in practice.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + Default
    + 'static
{
}

impl<T> Scalar for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + std::ops::AddAssign
        + std::ops::SubAssign
        + std::ops::MulAssign
        + std::iter::Sum
        + fmt::Debug
        + fmt::Display
        + Default
        + 'static
{
}
