//! Orchestration: corpus loading, model training and persistence,
//! multi-seed experiments, and ranked reports.

mod corpus;
mod embeddings;
mod experiment;
mod models;
mod persist;
mod rank;
mod zero_shot;

pub use corpus::{build_vocabulary, encode_packages, load_corpus, LoadedPackage};
pub use embeddings::EmbeddingTable;
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport, MetricRow, ModelSummary};
pub use models::{train_model, ModelArtifact, ModelFamily, ModelSpec, TrainSettings, TrainedModel};
pub use persist::{load_model, persist_model, FORMAT_MAGIC, FORMAT_VERSION};
pub use rank::{rank, RankedReport, RankedRow, TopNPrecision, TOP_N_FRACTIONS};
pub use zero_shot::{zero_shot_confusion, zero_shot_corpus, ZeroShotRow, ZeroShotSettings};

use std::path::PathBuf;

use thiserror::Error;

use crate::classical::ClassicalError;
use crate::encoding::EncodingError;
use crate::ggnn::GgnnError;
use crate::llm::LlmError;
use crate::manifest::ManifestError;
use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {message}")]
    Graph { path: PathBuf, message: String },
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Ggnn(#[from] GgnnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown model `{0}` (expected logistic-avg, logistic-max, svm-avg, svm-max, forest-avg, forest-max, ggnn or ggnn-fusion)")]
    UnknownModel(String),
    #[error("package `{0}` has no label")]
    Unlabeled(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("vocabulary mismatch: model uses {model}, graph `{package}` was encoded with {corpus}")]
    VocabularyMismatch { model: String, corpus: String, package: String },
    #[error("model file format {found} is not supported (expected {expected})")]
    FormatVersion { found: String, expected: String },
    #[error("model file is corrupted: {0}")]
    Corrupted(String),
    #[error("no external embedding for package `{0}`")]
    MissingEmbedding(String),
    #[error("embedding file: {0}")]
    Embeddings(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl PipelineError {
    /// Stable snake_case name of the variant, for machine-readable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Io { .. } => "io",
            PipelineError::Manifest(_) => "manifest",
            PipelineError::Graph { .. } => "graph",
            PipelineError::Encoding(_) => "encoding",
            PipelineError::Classical(_) => "classical",
            PipelineError::Ggnn(_) => "ggnn",
            PipelineError::Metrics(_) => "metrics",
            PipelineError::Config(_) => "config",
            PipelineError::UnknownModel(_) => "unknown_model",
            PipelineError::Unlabeled(_) => "unlabeled",
            PipelineError::EmptySplit(_) => "empty_split",
            PipelineError::VocabularyMismatch { .. } => "vocabulary_mismatch",
            PipelineError::FormatVersion { .. } => "format_version",
            PipelineError::Corrupted(_) => "corrupted",
            PipelineError::MissingEmbedding(_) => "missing_embedding",
            PipelineError::Embeddings(_) => "embeddings",
            PipelineError::Llm(_) => "llm",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }
}
