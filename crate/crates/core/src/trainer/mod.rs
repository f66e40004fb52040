//! Inner-loop training: an MLP, per-example scoring, the importance
//! sampling update and the per-step choice between IS and plain SGD.

pub mod importance;
pub mod mlp;
mod train;

use thiserror::Error;

pub use importance::{
    do_sgd_test, importance_distribution, is_sgd_step, is_weighted_gradient, sample_importance_indices,
    score_examples, vanilla_sgd_step, StepDecision,
};
pub use mlp::{mlp_forward_backward, per_example_losses, weighted_forward_backward, Gradients, MlpModel};
pub use train::{train, TrainFailure, TrainReport, TrainerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("layer widths {0:?} must list at least input and output, all positive")]
    InvalidArchitecture(Vec<usize>),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch has {actual} features, model expects {expected}")]
    FeatureMismatch { expected: usize, actual: usize },
    #[error("expected {expected} labels or weights, got {actual}")]
    LabelCount { expected: usize, actual: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("score {index} is negative or non-finite: {value}")]
    InvalidScore { index: usize, value: f64 },
    #[error("presample of {presample} cannot supply a batch of {batch}")]
    PresampleTooSmall { presample: usize, batch: usize },
    #[error("non-finite value during training")]
    NonFinite,
    #[error("invalid trainer setting: {0}")]
    InvalidConfig(String),
}
