//! Provenance graphs reported by a dynamic taint analysis run.
//!
//! A graph is the recorded history of every operation applied to tainted data
//! on its way to a sensitive sink. One JSON file holds one reported flow.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProvenanceError {
    #[error("malformed provenance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate node id {0}")]
    DuplicateId(u64),
    #[error("node {node} flows from unknown node {missing}")]
    UnknownReference { node: u64, missing: u64 },
    #[error("graph for package `{0}` has no sink node")]
    NoSink(String),
}

/// Taint status of the value an operation saw. `Unknown` is used when the
/// analysis omitted the attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Taint {
    Untainted,
    Tainted,
    #[default]
    Unknown,
}

impl Taint {
    fn from_json(v: Option<bool>) -> Self {
        match v {
            Some(true) => Taint::Tainted,
            Some(false) => Taint::Untainted,
            None => Taint::Unknown,
        }
    }

    fn to_json(self) -> Option<bool> {
        match self {
            Taint::Tainted => Some(true),
            Taint::Untainted => Some(false),
            Taint::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SinkKind {
    #[serde(rename = "spawn")]
    Spawn,
    #[serde(rename = "exec")]
    Exec,
    #[serde(rename = "Function")]
    Function,
    #[serde(rename = "eval")]
    Eval,
}

impl SinkKind {
    pub const ALL: [SinkKind; 4] = [SinkKind::Spawn, SinkKind::Exec, SinkKind::Function, SinkKind::Eval];

    /// Vulnerability class implied by reaching this sink.
    pub fn vuln_type(self) -> VulnType {
        match self {
            SinkKind::Eval | SinkKind::Function => VulnType::Ace,
            SinkKind::Exec | SinkKind::Spawn => VulnType::Aci,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SinkKind::Spawn => "spawn",
            SinkKind::Exec => "exec",
            SinkKind::Function => "Function",
            SinkKind::Eval => "eval",
        }
    }
}

/// ACE: arbitrary code execution. ACI: arbitrary command injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VulnType {
    #[serde(rename = "ACE")]
    Ace,
    #[serde(rename = "ACI")]
    Aci,
}

impl fmt::Display for VulnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VulnType::Ace => "ACE",
            VulnType::Aci => "ACI",
        })
    }
}

impl std::str::FromStr for VulnType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ACE" => Ok(VulnType::Ace),
            "ACI" => Ok(VulnType::Aci),
            other => Err(format!("unknown vulnerability type `{other}`")),
        }
    }
}

/// Source span as (start_line, start_col, end_line, end_col).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Position {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Position {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        Self { start_line, start_col, end_line, end_col }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceNode {
    pub id: u64,
    pub operation: String,
    pub value: String,
    pub file_path: String,
    pub position: Position,
    pub tainted: Taint,
    pub flows_from: Vec<u64>,
    pub sink_type: Option<SinkKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceGraph {
    pub package_name: String,
    pub vuln_type: VulnType,
    pub nodes: Vec<ProvenanceNode>,
    pub label: Option<bool>,
}

// Wire format. Unknown fields are ignored.

#[derive(Serialize, Deserialize)]
struct RawGraph {
    package: String,
    vuln_type: VulnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<bool>,
    nodes: Vec<RawNode>,
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    id: u64,
    #[serde(default)]
    operation: String,
    #[serde(default)]
    value: String,
    #[serde(default)]
    file: String,
    #[serde(default)]
    pos: [u32; 4],
    #[serde(default)]
    tainted: Option<bool>,
    flows_from: Vec<u64>,
    #[serde(default)]
    sink: Option<SinkKind>,
}

/// Parses one report. Edges must refer to nodes of the same graph.
pub fn parse_graph(raw: &[u8]) -> Result<ProvenanceGraph, ProvenanceError> {
    let raw: RawGraph = serde_json::from_slice(raw)?;
    let mut seen = HashSet::with_capacity(raw.nodes.len());
    for n in &raw.nodes {
        if !seen.insert(n.id) {
            return Err(ProvenanceError::DuplicateId(n.id));
        }
    }
    for n in &raw.nodes {
        if let Some(&missing) = n.flows_from.iter().find(|p| !seen.contains(p)) {
            return Err(ProvenanceError::UnknownReference { node: n.id, missing });
        }
    }
    let nodes = raw
        .nodes
        .into_iter()
        .map(|n| ProvenanceNode {
            id: n.id,
            operation: n.operation,
            value: n.value,
            file_path: n.file,
            position: Position::new(n.pos[0], n.pos[1], n.pos[2], n.pos[3]),
            tainted: Taint::from_json(n.tainted),
            flows_from: n.flows_from,
            sink_type: n.sink,
        })
        .collect();
    Ok(ProvenanceGraph { package_name: raw.package, vuln_type: raw.vuln_type, nodes, label: raw.label })
}

impl ProvenanceGraph {
    pub fn to_json(&self) -> Vec<u8> {
        let raw = RawGraph {
            package: self.package_name.clone(),
            vuln_type: self.vuln_type,
            label: self.label,
            nodes: self
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: n.id,
                    operation: n.operation.clone(),
                    value: n.value.clone(),
                    file: n.file_path.clone(),
                    pos: [n.position.start_line, n.position.start_col, n.position.end_line, n.position.end_col],
                    tainted: n.tainted.to_json(),
                    flows_from: n.flows_from.clone(),
                    sink: n.sink_type,
                })
                .collect(),
        };
        serde_json::to_vec_pretty(&raw).expect("graph serialization is infallible")
    }

    /// Indices into `nodes`, sorted by node id.
    pub fn id_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.nodes.len()).collect();
        idx.sort_by_key(|&i| self.nodes[i].id);
        idx
    }

    pub fn node(&self, id: u64) -> Option<&ProvenanceNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Predecessor → successor edges as node ids, in node order then
    /// `flows_from` order.
    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.nodes.iter().flat_map(|n| n.flows_from.iter().map(move |&p| (p, n.id)))
    }

    /// Kahn's algorithm; `None` when the flow relation has a cycle. Edges to
    /// unknown nodes are ignored here.
    pub fn topological_order(&self) -> Option<Vec<u64>> {
        let ids: BTreeMap<u64, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut indegree = vec![0usize; self.nodes.len()];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for p in &n.flows_from {
                if let Some(&pi) = ids.get(p) {
                    succ[pi].push(i);
                    indegree[i] += 1;
                }
            }
        }
        let mut queue: VecDeque<usize> =
            ids.values().copied().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(i) = queue.pop_front() {
            order.push(self.nodes[i].id);
            for &s in &succ[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Sink used when a single graph-level sink value is needed: the sink
    /// node with the smallest id.
    pub fn primary_sink(&self) -> Option<&ProvenanceNode> {
        self.nodes.iter().filter(|n| n.sink_type.is_some()).min_by_key(|n| n.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoSink,
    Cycle,
    DanglingEdge { node: u64, missing: u64 },
    InvalidPosition { node: u64 },
    DuplicateId { node: u64 },
    VulnTypeMismatch { node: u64, sink: SinkKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub package: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the structural rules a report must satisfy before it can be
/// encoded. Violations are returned as data.
pub fn validate(g: &ProvenanceGraph) -> ValidationReport {
    let mut violations = Vec::new();

    let mut counts: HashMap<u64, usize> = HashMap::new();
    for n in &g.nodes {
        *counts.entry(n.id).or_default() += 1;
    }
    let mut dups: Vec<u64> = counts.iter().filter(|(_, &c)| c > 1).map(|(&id, _)| id).collect();
    dups.sort_unstable();
    violations.extend(dups.into_iter().map(|node| Violation::DuplicateId { node }));

    if g.nodes.iter().all(|n| n.sink_type.is_none()) {
        violations.push(Violation::NoSink);
    }
    if g.topological_order().is_none() {
        violations.push(Violation::Cycle);
    }
    for n in &g.nodes {
        for &p in &n.flows_from {
            if !counts.contains_key(&p) {
                violations.push(Violation::DanglingEdge { node: n.id, missing: p });
            }
        }
        if n.position.start_line > n.position.end_line {
            violations.push(Violation::InvalidPosition { node: n.id });
        }
        if let Some(sink) = n.sink_type {
            if sink.vuln_type() != g.vuln_type {
                violations.push(Violation::VulnTypeMismatch { node: n.id, sink });
            }
        }
    }
    ValidationReport { package: g.package_name.clone(), violations }
}

/// Sink nodes in ascending id order.
pub fn sink_nodes(g: &ProvenanceGraph) -> Result<Vec<&ProvenanceNode>, ProvenanceError> {
    let mut sinks: Vec<&ProvenanceNode> = g.nodes.iter().filter(|n| n.sink_type.is_some()).collect();
    if sinks.is_empty() {
        return Err(ProvenanceError::NoSink(g.package_name.clone()));
    }
    sinks.sort_by_key(|n| n.id);
    Ok(sinks)
}
