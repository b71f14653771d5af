use crate::encoding::{encode_graph, EncodedGraph, OperationVocabulary};
use crate::exec::Exec;
use crate::manifest::{Manifest, ManifestRow};
use crate::provenance::{parse_graph, ProvenanceGraph};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPackage {
    pub row: ManifestRow,
    pub graph: ProvenanceGraph,
}

/// Parses every graph in the manifest. The manifest label, when present,
/// takes precedence over a label embedded in the graph file.
pub fn load_corpus(manifest: &Manifest, exec: Exec) -> Result<Vec<LoadedPackage>, PipelineError> {
    let loaded = exec.map(&manifest.rows, |row| {
        let path = manifest.resolve(&row.graph_path);
        let raw = std::fs::read(&path).map_err(PipelineError::io(&path))?;
        let mut graph =
            parse_graph(&raw).map_err(|e| PipelineError::Graph { path: path.clone(), message: e.to_string() })?;
        if row.label.is_some() {
            graph.label = row.label;
        }
        Ok(LoadedPackage { row: row.clone(), graph })
    });
    loaded.into_iter().collect()
}

pub fn build_vocabulary(corpus_id: &str, train: &[&LoadedPackage]) -> Result<OperationVocabulary, PipelineError> {
    let graphs: Vec<ProvenanceGraph> = train.iter().map(|p| p.graph.clone()).collect();
    Ok(OperationVocabulary::build(corpus_id, &graphs)?)
}

pub fn encode_packages(
    packages: &[&LoadedPackage],
    vocab: &OperationVocabulary,
    exec: Exec,
) -> Result<Vec<EncodedGraph>, PipelineError> {
    exec.map(packages, |p| encode_graph(&p.graph, vocab).map_err(PipelineError::from)).into_iter().collect()
}
