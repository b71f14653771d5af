//! Gated graph neural network with global attention pooling and an
//! optional fusion head for externally computed embeddings.

mod gradcheck;
mod model;
mod params;
mod train;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, FD_STEP, RELATIVE_FLOOR};
pub use model::{forward, fuse_and_classify, ggnn_forward, loss, loss_and_gradient, Forward, GgnnInput};
pub use params::{GgnnConfig, GgnnParams, LinearHead, TENSOR_NAMES};
pub use train::{batch_gradient, train_ggnn, EpochRecord, GgnnModel, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GgnnError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("training set must contain both labels")]
    SingleClass,
    #[error("non-finite value encountered")]
    NonFinite,
}
