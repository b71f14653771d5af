use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Precomputed per-package embeddings for the fusion head:
/// `{"width": n, "embeddings": {"<package>": [n reals], ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub width: usize,
    pub embeddings: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn from_json(raw: &str) -> Result<Self, PipelineError> {
        let t: EmbeddingTable = serde_json::from_str(raw).map_err(|e| PipelineError::Embeddings(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let raw = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
        Self::from_json(&raw)
    }

    fn check(&self) -> Result<(), PipelineError> {
        if self.width == 0 {
            return Err(PipelineError::Embeddings("width must be positive".into()));
        }
        for (pkg, v) in &self.embeddings {
            if v.len() != self.width {
                return Err(PipelineError::Embeddings(format!(
                    "`{pkg}` has {} values, header declares {}",
                    v.len(),
                    self.width
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(PipelineError::Embeddings(format!("`{pkg}` contains non-finite values")));
            }
        }
        Ok(())
    }

    pub fn get(&self, package: &str) -> Result<&[f64], PipelineError> {
        self.embeddings.get(package).map(Vec::as_slice).ok_or_else(|| PipelineError::MissingEmbedding(package.into()))
    }
}
