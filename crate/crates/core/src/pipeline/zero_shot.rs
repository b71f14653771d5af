use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::llm::{
    append_transcript, build_prompt, classify_zero_shot, estimate_tokens, extract_snippet, prompt_hash, unix_ms,
    ChatTransport, LlmError, RetryPolicy, SnippetRequest, ThinkDelimiters, TranscriptRecord, TOKEN_HEURISTIC,
};
use crate::metrics::{confusion, ConfusionCounts};

use super::{LoadedPackage, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotRow {
    pub package: String,
    pub label: Option<bool>,
    /// Absent when the package could not be classified.
    pub verdict: Option<bool>,
    pub error: Option<String>,
}

pub struct ZeroShotSettings<'a> {
    pub model: &'a str,
    pub delimiters: &'a [ThinkDelimiters],
    pub policy: RetryPolicy,
    pub budget: usize,
    pub transcript: Option<&'a Path>,
}

/// Package root and sink file for the snippet. A `source_path` naming a
/// directory is the package root; one naming a file is the sink file.
fn snippet_location(manifest_dir: &Path, pkg: &LoadedPackage) -> Result<(PathBuf, PathBuf), PipelineError> {
    let sink = pkg
        .graph
        .primary_sink()
        .ok_or_else(|| PipelineError::Graph { path: pkg.row.graph_path.clone().into(), message: "no sink".into() })?;
    let src = manifest_dir.join(&pkg.row.source_path);
    if src.is_dir() {
        Ok((src, PathBuf::from(&sink.file_path)))
    } else {
        let root = src.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = src.file_name().map(PathBuf::from).unwrap_or_default();
        Ok((root, file))
    }
}

fn classify_one(
    manifest_dir: &Path,
    pkg: &LoadedPackage,
    transport: &dyn ChatTransport,
    s: &ZeroShotSettings<'_>,
    sleep: &mut dyn FnMut(Duration),
) -> TranscriptRecord {
    let started = unix_ms();
    let mut rec = TranscriptRecord {
        package: pkg.row.package.clone(),
        model: s.model.to_string(),
        prompt_sha256: String::new(),
        token_estimate: 0,
        token_heuristic: TOKEN_HEURISTIC.to_string(),
        raw_response: None,
        verdict: None,
        reasoning_stripped: None,
        attempts: 0,
        error: None,
        started_unix_ms: started,
        finished_unix_ms: started,
    };
    let prompt = snippet_location(manifest_dir, pkg).map_err(|e| e.to_string()).and_then(|(root, file)| {
        let sink = pkg.graph.primary_sink().expect("checked by snippet_location");
        let mut req = SnippetRequest::new(root, file, sink.position.start_line as usize, sink.position.start_col as usize);
        req.budget = s.budget;
        let snippet = extract_snippet(&req).map_err(|e| e.to_string())?;
        build_prompt(&snippet).map_err(|e| e.to_string())
    });
    match prompt {
        Err(e) => rec.error = Some(e),
        Ok(prompt) => {
            rec.prompt_sha256 = prompt_hash(&prompt);
            rec.token_estimate = estimate_tokens(&prompt);
            match classify_zero_shot(transport, s.model, &prompt, s.delimiters, s.policy, sleep) {
                Ok(v) => {
                    rec.attempts = v.attempts;
                    rec.raw_response = Some(v.raw_response);
                    rec.verdict = Some(v.verdict);
                    rec.reasoning_stripped = Some(v.reasoning_stripped);
                }
                Err(e) => {
                    if let LlmError::Transport { attempts, .. } = &e {
                        rec.attempts = *attempts;
                    }
                    rec.error = Some(e.to_string());
                }
            }
        }
    }
    rec.finished_unix_ms = unix_ms();
    rec
}

/// Classifies packages one at a time, in order. Per-package failures are
/// recorded in the row and transcript instead of aborting the batch.
pub fn zero_shot_corpus(
    manifest_dir: &Path,
    packages: &[&LoadedPackage],
    transport: &dyn ChatTransport,
    settings: &ZeroShotSettings<'_>,
    sleep: &mut dyn FnMut(Duration),
) -> Result<Vec<ZeroShotRow>, PipelineError> {
    let mut rows = Vec::with_capacity(packages.len());
    for pkg in packages {
        let rec = classify_one(manifest_dir, pkg, transport, settings, sleep);
        if let Some(path) = settings.transcript {
            append_transcript(path, std::slice::from_ref(&rec))?;
        }
        rows.push(ZeroShotRow { package: rec.package, label: pkg.row.label, verdict: rec.verdict, error: rec.error });
    }
    Ok(rows)
}

/// Confusion counts over rows that have both a verdict and a label.
pub fn zero_shot_confusion(rows: &[ZeroShotRow]) -> Option<ConfusionCounts> {
    let (v, l): (Vec<bool>, Vec<bool>) = rows.iter().filter_map(|r| Some((r.verdict?, r.label?))).unzip();
    confusion(&v, &l).ok()
}
