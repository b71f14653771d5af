//! Deterministic synthetic packages: a provenance graph shaped like the
//! toygrep flow (source call, string operations, sink) plus a matching
//! JavaScript source file.
//!
//! Vulnerable packages carry taint from the source all the way into an
//! `exec` or `eval` sink. Benign packages pass the value through a
//! sanitizer, after which every node is untainted, or (profile
//! `spawn-benign`) end in a `spawn` sink.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::manifest::{Manifest, ManifestError, ManifestRow};
use crate::provenance::{Position, ProvenanceGraph, ProvenanceNode, SinkKind, Taint};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    BadProfile(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// Structure determines the label exactly.
    Separable,
    /// Like `separable`, but each package's structure is drawn from the
    /// opposite class with probability `noise`.
    Noisy,
    /// Benign packages end in a `spawn` sink with probability 0.95.
    SpawnBenign,
}

impl std::str::FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separable" => Ok(ProfileKind::Separable),
            "noisy" => Ok(ProfileKind::Noisy),
            "spawn-benign" => Ok(ProfileKind::SpawnBenign),
            other => Err(format!("unknown profile `{other}`")),
        }
    }
}

pub const DEFAULT_OPS: [&str; 8] = [
    "string.concat",
    "string.replace",
    "template.literal",
    "array.join",
    "string.trim",
    "string.slice",
    "string.toLowerCase",
    "call:format",
];

pub const SANITIZERS: [&str; 4] = ["call:shellEscape", "call:sanitize", "call:parseInt", "call:encodeURIComponent"];

const SOURCE_FNS: [&str; 8] = ["grep", "run", "build", "convert", "open", "render", "compile", "lookup"];
const WORDS: [&str; 6] = ["grep ", "-la", "ls ", "echo ", ".tmp", "/usr/bin/"];
const SPAWN_PROBABILITY: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthProfile {
    pub kind: ProfileKind,
    pub n_packages: usize,
    pub vuln_ratio: f64,
    /// Inclusive node-count range.
    pub node_count: (usize, usize),
    pub op_alphabet: Vec<String>,
    pub seed: u64,
    pub noise: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            kind: ProfileKind::Separable,
            n_packages: 100,
            vuln_ratio: 989.0 / 1506.0,
            node_count: (4, 9),
            op_alphabet: DEFAULT_OPS.iter().map(|s| s.to_string()).collect(),
            seed: 2025,
            noise: 0.2,
        }
    }
}

impl SynthProfile {
    pub fn new(kind: ProfileKind, n_packages: usize, seed: u64) -> Self {
        Self { kind, n_packages, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadProfile(m));
        if !(0.0..=1.0).contains(&self.vuln_ratio) {
            return bad(format!("vuln_ratio {} outside [0, 1]", self.vuln_ratio));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1]", self.noise));
        }
        let (lo, hi) = self.node_count;
        if lo < 2 || lo > hi {
            return bad(format!("node_count range ({lo}, {hi}) must satisfy 2 <= min <= max"));
        }
        if self.op_alphabet.is_empty() || self.op_alphabet.iter().any(|o| o.is_empty()) {
            return bad("op_alphabet must contain non-empty operations".into());
        }
        Ok(())
    }

    /// round(vuln_ratio · n_packages).
    pub fn vulnerable_count(&self) -> usize {
        ((self.vuln_ratio * self.n_packages as f64).round() as usize).min(self.n_packages)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPackage {
    pub graph: ProvenanceGraph,
    pub source: String,
    pub label: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Shape {
    Vulnerable,
    Sanitized,
    Spawn,
}

struct Builder {
    nodes: Vec<ProvenanceNode>,
    lines: Vec<String>,
}

impl Builder {
    fn push(&mut self, op: &str, value: &str, tainted: bool, from: Vec<u64>, code: String, sink: Option<SinkKind>) -> u64 {
        let id = self.nodes.len() as u64 + 1;
        let line = self.lines.len() as u32 + 1;
        let end_col = code.chars().count() as u32;
        self.lines.push(code);
        self.nodes.push(ProvenanceNode {
            id,
            operation: op.to_string(),
            value: value.to_string(),
            file_path: "index.js".into(),
            position: Position::new(line, 4, line, end_col),
            tainted: if tainted { Taint::Tainted } else { Taint::Untainted },
            flows_from: from,
            sink_type: sink,
        });
        id
    }
}

fn op_expression(op: &str, a: &str, b: Option<&str>) -> String {
    match (op, b) {
        ("string.concat", Some(b)) => format!("{a} + {b}"),
        ("string.concat", None) => format!("{a} + \" \""),
        ("template.literal", Some(b)) => format!("`${{{a}}} ${{{b}}}`"),
        ("template.literal", None) => format!("`${{{a}}}`"),
        ("array.join", Some(b)) => format!("[{a}, {b}].join(\" \")"),
        ("array.join", None) => format!("[{a}].join(\" \")"),
        ("string.replace", b) => format!("{a}.replace(/\\s+/g, {})", b.unwrap_or("\" \"")),
        ("string.trim", _) => format!("{a}.trim()"),
        ("string.slice", _) => format!("{a}.slice(0)"),
        ("string.toLowerCase", _) => format!("{a}.toLowerCase()"),
        (op, b) => {
            let name = op.strip_prefix("call:").unwrap_or(op).replace(|c: char| !c.is_alphanumeric(), "_");
            match b {
                Some(b) => format!("{name}({a}, {b})"),
                None => format!("{name}({a})"),
            }
        }
    }
}

fn build(name: &str, shape: Shape, sink: SinkKind, rng: &mut ChaCha8Rng, profile: &SynthProfile) -> (ProvenanceGraph, String) {
    let (lo, hi) = profile.node_count;
    let n = rng.random_range(lo..=hi);
    let fname = SOURCE_FNS[rng.random_range(0..SOURCE_FNS.len())];
    let mut b = Builder { nodes: Vec::new(), lines: Vec::new() };

    let fixed = if shape == Shape::Sanitized { 3 } else { 2 };
    // With only two nodes a sanitized flow degenerates to an untainted source.
    let literal_source = shape == Shape::Sanitized && n < fixed;
    let middle = n - if literal_source { 2 } else { fixed };
    let n_ops = middle.div_ceil(2);
    let n_consts = middle - n_ops;
    let sanitize_at = if shape == Shape::Sanitized && !literal_source { Some(rng.random_range(0..=n_ops)) } else { None };

    let mut tainted = !literal_source;
    let (src_op, src_val) =
        if literal_source { ("literal".to_string(), "[String: 'input']") } else { (format!("call:{fname}"), "'tainted'") };
    let mut current = b.push(&src_op, src_val, tainted, vec![], format!("function {fname}(input) {{"), None);
    b.nodes[0].position = Position::new(1, 0, (n + 1) as u32, 1);
    let var = |id: u64| format!("v{id}");
    let mut current_var = "input".to_string();

    for k in 0..=n_ops {
        if sanitize_at == Some(k) {
            let op = SANITIZERS[rng.random_range(0..SANITIZERS.len())];
            let id = b.nodes.len() as u64 + 1;
            let code = format!("    const {} = {};", var(id), op_expression(op, &current_var, None));
            tainted = false;
            current = b.push(op, "'sanitized'", false, vec![current], code, None);
            current_var = var(current);
        }
        if k == n_ops {
            break;
        }
        let op = &profile.op_alphabet[rng.random_range(0..profile.op_alphabet.len())];
        let mut from = vec![current];
        let mut other = None;
        if k < n_consts {
            let word = WORDS[rng.random_range(0..WORDS.len())];
            let id = b.nodes.len() as u64 + 1;
            let lit = format!("{word:?}");
            let c = b.push("literal", &format!("[String: '{word}']"), false, vec![], format!("    const {} = {lit};", var(id)), None);
            from.insert(0, c);
            other = Some(var(c));
        }
        let id = b.nodes.len() as u64 + 1;
        let code = format!("    const {} = {};", var(id), op_expression(op, &current_var, other.as_deref()));
        let value = if tainted { "'tainted'" } else { "'clean'" };
        current = b.push(op, value, tainted, from, code, None);
        current_var = var(current);
    }

    let call = match sink {
        SinkKind::Spawn => format!("    spawn(\"sh\", [\"-c\", {current_var}]);"),
        SinkKind::Exec => format!("    exec({current_var});"),
        SinkKind::Eval => format!("    eval({current_var});"),
        SinkKind::Function => format!("    new Function({current_var})();"),
    };
    let value = if tainted { "'tainted'" } else { "'clean'" };
    b.push(&format!("call:{}", sink.as_str()), value, tainted, vec![current], call, Some(sink));
    b.lines.push("}".into());
    b.lines.push(format!("module.exports = {fname};"));

    let graph = ProvenanceGraph { package_name: name.to_string(), vuln_type: sink.vuln_type(), nodes: b.nodes, label: None };
    let mut source = b.lines.join("\n");
    source.push('\n');
    (graph, source)
}

/// Builds one package with the given label and name from `seed`.
pub fn generate_labeled(seed: u64, profile: &SynthProfile, label: bool, name: &str) -> SynthPackage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let structural = match profile.kind {
        ProfileKind::Noisy if rng.random_bool(profile.noise) => !label,
        _ => label,
    };
    let shape = match (structural, profile.kind) {
        (true, _) => Shape::Vulnerable,
        (false, ProfileKind::SpawnBenign) if rng.random_bool(SPAWN_PROBABILITY) => Shape::Spawn,
        (false, _) => Shape::Sanitized,
    };
    let sink = match shape {
        Shape::Spawn => SinkKind::Spawn,
        _ => {
            if rng.random_bool(0.5) {
                SinkKind::Exec
            } else {
                SinkKind::Eval
            }
        }
    };
    let (mut graph, source) = build(name, shape, sink, &mut rng, profile);
    graph.label = Some(label);
    SynthPackage { graph, source, label }
}

/// One package whose label is drawn with probability `vuln_ratio`.
pub fn generate_package(seed: u64, profile: &SynthProfile) -> Result<SynthPackage, SynthError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let label = rng.random_bool(profile.vuln_ratio);
    Ok(generate_labeled(seed, profile, label, &format!("synth-{seed}")))
}

pub fn package_name(profile: &SynthProfile, index: usize) -> String {
    let kind = serde_json::to_value(profile.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    format!("{kind}-{index:05}")
}

/// Exactly [`SynthProfile::vulnerable_count`] vulnerable labels, shuffled
/// with the profile seed; package `i` is generated from `seed + i`.
pub fn generate_packages(profile: &SynthProfile, exec: Exec) -> Result<Vec<SynthPackage>, SynthError> {
    profile.validate()?;
    let n = profile.n_packages;
    let k = profile.vulnerable_count();
    let mut labels: Vec<bool> = (0..n).map(|i| i < k).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(2);
    labels.shuffle(&mut rng);
    Ok(exec.map_range(n, |i| {
        generate_labeled(profile.seed.wrapping_add(i as u64), profile, labels[i], &package_name(profile, i))
    }))
}

/// Writes `graphs/<pkg>.json`, `sources/<pkg>/index.js` and `manifest.csv`
/// under `out_dir` (split column left empty).
pub fn generate_corpus(profile: &SynthProfile, out_dir: &Path, exec: Exec) -> Result<Manifest, SynthError> {
    let packages = generate_packages(profile, exec)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    for sub in ["graphs", "sources"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io(&d))?;
    }
    let mut rows = Vec::with_capacity(packages.len());
    for p in &packages {
        let name = &p.graph.package_name;
        let graph_rel = format!("graphs/{name}.json");
        let source_rel = format!("sources/{name}/index.js");
        let gp = out_dir.join(&graph_rel);
        std::fs::write(&gp, p.graph.to_json()).map_err(io(&gp))?;
        let sp = out_dir.join(&source_rel);
        let sd = sp.parent().expect("nested path");
        std::fs::create_dir_all(sd).map_err(io(sd))?;
        std::fs::write(&sp, &p.source).map_err(io(&sp))?;
        rows.push(ManifestRow {
            package: name.clone(),
            graph_path: graph_rel,
            source_path: source_rel,
            vuln_type: p.graph.vuln_type,
            label: Some(p.label),
            split: None,
        });
    }
    let manifest = Manifest::new(out_dir, rows)?;
    manifest.write(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}
