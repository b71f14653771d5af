//! Model files: one header line `FLOWTRIAGE-MODEL v<version> sha256=<hex>`
//! followed by the JSON artifact. The digest covers the JSON body.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ModelArtifact, PipelineError, TrainedModel};

pub const FORMAT_MAGIC: &str = "FLOWTRIAGE-MODEL";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_artifact(artifact: &ModelArtifact) -> Vec<u8> {
    let body = serde_json::to_vec(artifact).expect("artifact serializes");
    let digest = hex::encode(Sha256::digest(&body));
    let mut out = format!("{FORMAT_MAGIC} v{FORMAT_VERSION} sha256={digest}\n").into_bytes();
    out.extend_from_slice(&body);
    out
}

pub fn decode_artifact(raw: &[u8]) -> Result<ModelArtifact, PipelineError> {
    let corrupted = |m: &str| PipelineError::Corrupted(m.to_string());
    let newline = raw.iter().position(|&b| b == b'\n').ok_or_else(|| corrupted("missing header line"))?;
    let header = std::str::from_utf8(&raw[..newline]).map_err(|_| corrupted("header is not UTF-8"))?;
    let mut parts = header.split(' ');
    if parts.next() != Some(FORMAT_MAGIC) {
        return Err(corrupted("not a model file"));
    }
    let version = parts.next().ok_or_else(|| corrupted("missing format version"))?;
    if version != format!("v{FORMAT_VERSION}") {
        return Err(PipelineError::FormatVersion { found: version.to_string(), expected: format!("v{FORMAT_VERSION}") });
    }
    let digest = parts
        .next()
        .and_then(|p| p.strip_prefix("sha256="))
        .ok_or_else(|| corrupted("missing checksum"))?;
    let body = &raw[newline + 1..];
    if hex::encode(Sha256::digest(body)) != digest {
        return Err(corrupted("checksum mismatch (file truncated or modified)"));
    }
    let mut artifact: ModelArtifact = serde_json::from_slice(body).map_err(|e| corrupted(&e.to_string()))?;
    if let TrainedModel::Ggnn { model, .. } = &mut artifact.model {
        model.params = model.params.clone().normalize()?;
    }
    Ok(artifact)
}

pub fn persist_model(artifact: &ModelArtifact, path: &Path) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(PipelineError::io(dir))?;
    }
    std::fs::write(path, encode_artifact(artifact)).map_err(PipelineError::io(path))
}

pub fn load_model(path: &Path) -> Result<ModelArtifact, PipelineError> {
    let raw = std::fs::read(path).map_err(PipelineError::io(path))?;
    decode_artifact(&raw)
}
