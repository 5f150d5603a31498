//! Feed-forward networks with exact reverse-mode gradients, Adam, a squashed
//! Gaussian head and finite-difference checking.

mod adam;
mod checkpoint;
mod gaussian;
mod gradcheck;
mod mlp;
mod params;

pub use adam::{adam_step, AdamConfig};
pub use checkpoint::Checkpoint;
pub use gaussian::{
    deterministic_action, gaussian_sample, gaussian_sample_backward, GaussianHeadOutput,
    SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport};
pub use mlp::{Activation, Mlp, MlpSpec, MlpTape};
pub use params::{Param, ParamRecord, ParamStore};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("non-finite gradient in `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
