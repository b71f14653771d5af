//! Edge-free classifiers over pooled node features.

mod forest;
mod linear;
mod pool;

pub use forest::{train_forest, ForestConfig, ForestModel, Tree, TreeNode};
pub use linear::{class_weights, train_linear, LinearConfig, LinearKind, LinearModel};
pub use pool::{pool, GraphVector, Pooling};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClassicalError {
    #[error("cannot pool a graph without nodes")]
    EmptyGraph,
    #[error("feature width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("training set must contain both labels")]
    SingleClass,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
