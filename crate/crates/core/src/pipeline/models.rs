use serde::{Deserialize, Serialize};

use crate::classical::{
    pool, train_forest, train_linear, ForestConfig, ForestModel, GraphVector, LinearConfig, LinearKind, LinearModel,
    Pooling,
};
use crate::encoding::{EncodedGraph, OperationVocabulary, FEATURE_WIDTH};
use crate::exec::Exec;
use crate::ggnn::{train_ggnn, GgnnInput, GgnnModel, TrainConfig};

use super::{EmbeddingTable, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Logistic,
    Svm,
    Forest,
    Ggnn,
}

/// A trainable configuration, named like `logistic-max` or `ggnn-fusion`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub family: ModelFamily,
    /// Pooling for the edge-free families.
    pub pooling: Option<Pooling>,
    /// GGNN with the external embedding concatenated before the head.
    pub fusion: bool,
}

impl std::str::FromStr for ModelSpec {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || PipelineError::UnknownModel(s.to_string());
        match s {
            "ggnn" => return Ok(ModelSpec { family: ModelFamily::Ggnn, pooling: None, fusion: false }),
            "ggnn-fusion" => return Ok(ModelSpec { family: ModelFamily::Ggnn, pooling: None, fusion: true }),
            _ => {}
        }
        let (family, pooling) = s.rsplit_once('-').ok_or_else(unknown)?;
        let family = match family {
            "logistic" => ModelFamily::Logistic,
            "svm" => ModelFamily::Svm,
            "forest" => ModelFamily::Forest,
            _ => return Err(unknown()),
        };
        let pooling: Pooling = pooling.parse().map_err(|_| unknown())?;
        Ok(ModelSpec { family, pooling: Some(pooling), fusion: false })
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let family = match self.family {
            ModelFamily::Logistic => "logistic",
            ModelFamily::Svm => "svm",
            ModelFamily::Forest => "forest",
            ModelFamily::Ggnn => return f.write_str(if self.fusion { "ggnn-fusion" } else { "ggnn" }),
        };
        let pooling = match self.pooling {
            Some(Pooling::Avg) => "avg",
            _ => "max",
        };
        write!(f, "{family}-{pooling}")
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub linear: LinearConfig,
    pub forest: ForestConfig,
    pub ggnn: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainedModel {
    Linear { pooling: Pooling, model: LinearModel },
    Forest { pooling: Pooling, model: ForestModel },
    Ggnn { fusion: bool, model: Box<GgnnModel> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    /// `<spec>-seed<seed>`
    pub id: String,
    pub spec: ModelSpec,
    pub seed: u64,
    /// Verdict threshold on the score.
    pub threshold: f64,
    pub vocabulary: OperationVocabulary,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn vocab_id(&self) -> String {
        self.vocabulary.fingerprint()
    }

    pub fn external_width(&self) -> Option<usize> {
        match &self.model {
            TrainedModel::Ggnn { fusion: true, model } => Some(model.params.config.external_dim),
            _ => None,
        }
    }

    /// P(vulnerable) for one encoded graph. `external` is required exactly
    /// when the model was trained with fusion.
    pub fn score(&self, eg: &EncodedGraph, external: Option<&[f64]>) -> Result<f64, PipelineError> {
        if eg.vocab_id != self.vocab_id() {
            return Err(PipelineError::VocabularyMismatch {
                model: self.vocab_id(),
                corpus: eg.vocab_id.clone(),
                package: eg.package_name.clone(),
            });
        }
        Ok(match &self.model {
            TrainedModel::Linear { pooling, model } => model.predict_score(&pool(eg, *pooling)?)?,
            TrainedModel::Forest { pooling, model } => model.predict_score(&pool(eg, *pooling)?)?,
            TrainedModel::Ggnn { fusion, model } => {
                let ext = if *fusion {
                    Some(external.ok_or_else(|| PipelineError::MissingEmbedding(eg.package_name.clone()))?)
                } else {
                    None
                };
                model.score(&GgnnInput::from_encoded(eg, ext)?)?
            }
        })
    }

    pub fn score_all(
        &self,
        graphs: &[EncodedGraph],
        embeddings: Option<&EmbeddingTable>,
        exec: Exec,
    ) -> Result<Vec<f64>, PipelineError> {
        let needs_ext = self.external_width().is_some();
        if needs_ext && embeddings.is_none() {
            return Err(PipelineError::Config("fusion model requires an embedding file".into()));
        }
        exec.map(graphs, |eg| {
            let ext = match (needs_ext, embeddings) {
                (true, Some(t)) => Some(t.get(&eg.package_name)?),
                _ => None,
            };
            self.score(eg, ext)
        })
        .into_iter()
        .collect()
    }
}

fn labels_of(graphs: &[EncodedGraph]) -> Result<Vec<bool>, PipelineError> {
    graphs.iter().map(|g| g.label.ok_or_else(|| PipelineError::Unlabeled(g.package_name.clone()))).collect()
}

fn pooled(graphs: &[EncodedGraph], pooling: Pooling, labels: &[bool]) -> Result<Vec<(GraphVector, bool)>, PipelineError> {
    graphs.iter().zip(labels).map(|(g, &y)| Ok((pool(g, pooling)?, y))).collect()
}

fn ggnn_inputs(
    graphs: &[EncodedGraph],
    labels: &[bool],
    embeddings: Option<&EmbeddingTable>,
) -> Result<Vec<(GgnnInput, bool)>, PipelineError> {
    graphs
        .iter()
        .zip(labels)
        .map(|(g, &y)| {
            let ext = embeddings.map(|t| t.get(&g.package_name)).transpose()?;
            Ok((GgnnInput::from_encoded(g, ext)?, y))
        })
        .collect()
}

/// Trains one model on encoded train/validation graphs. The seed replaces
/// the seed in the family's configuration. Validation data is used only by
/// the GGNN's early stopping.
#[allow(clippy::too_many_arguments)]
pub fn train_model(
    spec: ModelSpec,
    seed: u64,
    train: &[EncodedGraph],
    val: &[EncodedGraph],
    vocabulary: &OperationVocabulary,
    settings: &TrainSettings,
    embeddings: Option<&EmbeddingTable>,
    exec: Exec,
) -> Result<ModelArtifact, PipelineError> {
    if train.is_empty() {
        return Err(PipelineError::EmptySplit("train"));
    }
    let vocab_id = vocabulary.fingerprint();
    for g in train.iter().chain(val) {
        if g.vocab_id != vocab_id {
            return Err(PipelineError::VocabularyMismatch {
                model: vocab_id,
                corpus: g.vocab_id.clone(),
                package: g.package_name.clone(),
            });
        }
    }
    let y_train = labels_of(train)?;
    let model = match spec.family {
        ModelFamily::Logistic | ModelFamily::Svm => {
            let pooling = spec.pooling.unwrap_or(Pooling::Max);
            let kind = if spec.family == ModelFamily::Logistic { LinearKind::Logistic } else { LinearKind::LinearSvm };
            let cfg = LinearConfig { kind, seed, ..settings.linear.clone() };
            TrainedModel::Linear { pooling, model: train_linear(&pooled(train, pooling, &y_train)?, &cfg)? }
        }
        ModelFamily::Forest => {
            let pooling = spec.pooling.unwrap_or(Pooling::Max);
            let cfg = ForestConfig { seed, exec, ..settings.forest.clone() };
            TrainedModel::Forest { pooling, model: train_forest(&pooled(train, pooling, &y_train)?, &cfg)? }
        }
        ModelFamily::Ggnn => {
            if val.is_empty() {
                return Err(PipelineError::EmptySplit("validate"));
            }
            let y_val = labels_of(val)?;
            let table = if spec.fusion {
                Some(embeddings.ok_or_else(|| PipelineError::Config("ggnn-fusion requires an embedding file".into()))?)
            } else {
                None
            };
            let mut cfg = TrainConfig { seed, exec, ..settings.ggnn.clone() };
            cfg.model.input_dim = FEATURE_WIDTH;
            cfg.model.external_dim = table.map_or(0, |t| t.width);
            let model = train_ggnn(&ggnn_inputs(train, &y_train, table)?, &ggnn_inputs(val, &y_val, table)?, &cfg)?;
            TrainedModel::Ggnn { fusion: spec.fusion, model: Box::new(model) }
        }
    };
    Ok(ModelArtifact {
        id: format!("{spec}-seed{seed}"),
        spec,
        seed,
        threshold: 0.5,
        vocabulary: vocabulary.clone(),
        model,
    })
}
