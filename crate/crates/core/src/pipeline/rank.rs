use serde::{Deserialize, Serialize};

use crate::encoding::EncodedGraph;
use crate::exec::Exec;
use crate::metrics::top_n_precision;
use crate::provenance::Position;

use super::{EmbeddingTable, ModelArtifact, PipelineError};

pub const TOP_N_FRACTIONS: [f64; 5] = [0.05, 0.10, 0.25, 0.50, 1.00];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    /// 1-based.
    pub rank: usize,
    pub package: String,
    pub score: f64,
    pub verdict: bool,
    pub model_id: String,
    pub sink_file: String,
    pub sink_position: Position,
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNPrecision {
    pub fraction: f64,
    pub count: usize,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedReport {
    pub model_id: String,
    pub vocab_id: String,
    pub threshold: f64,
    pub rows: Vec<RankedRow>,
    /// Present only when every ranked package is labeled.
    pub top_n: Option<Vec<TopNPrecision>>,
}

/// Scores every graph and orders by descending score, then ascending
/// package name.
pub fn rank(
    artifact: &ModelArtifact,
    graphs: &[EncodedGraph],
    embeddings: Option<&EmbeddingTable>,
    exec: Exec,
) -> Result<RankedReport, PipelineError> {
    let scores = artifact.score_all(graphs, embeddings, exec)?;
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].total_cmp(&scores[a]).then_with(|| graphs[a].package_name.cmp(&graphs[b].package_name))
    });
    let rows: Vec<RankedRow> = order
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let g = &graphs[i];
            RankedRow {
                rank: r + 1,
                package: g.package_name.clone(),
                score: scores[i],
                verdict: scores[i] >= artifact.threshold,
                model_id: artifact.id.clone(),
                sink_file: g.sink_file.clone(),
                sink_position: g.sink_position,
                label: g.label,
            }
        })
        .collect();

    let labels: Option<Vec<bool>> = rows.iter().map(|r| r.label).collect();
    let top_n = match labels {
        Some(labels) if !labels.is_empty() => {
            let ranked_scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let mut out = Vec::new();
            for f in TOP_N_FRACTIONS {
                out.push(TopNPrecision {
                    fraction: f,
                    count: crate::metrics::top_n_count(labels.len(), f)?,
                    precision: top_n_precision(&ranked_scores, &labels, f)?,
                });
            }
            Some(out)
        }
        _ => None,
    };
    Ok(RankedReport {
        model_id: artifact.id.clone(),
        vocab_id: artifact.vocab_id(),
        threshold: artifact.threshold,
        rows,
        top_n,
    })
}

impl RankedReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "package", "score", "verdict", "model_id", "sink_file", "sink_line", "sink_col", "label"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.rank.to_string(),
                r.package.clone(),
                format!("{:.6}", r.score),
                r.verdict.to_string(),
                r.model_id.clone(),
                r.sink_file.clone(),
                r.sink_position.start_line.to_string(),
                r.sink_position.start_col.to_string(),
                r.label.map(|l| l.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush to Vec")).expect("csv is UTF-8")
    }
}
