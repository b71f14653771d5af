//! Categorical node features.
//!
//! Each node becomes four concatenated one-hot blocks:
//!
//! | block       | slots | classes                                          |
//! |-------------|-------|--------------------------------------------------|
//! | operation   | 102   | 0–99 vocabulary rank, 100 rare, 101 empty        |
//! | tainted     | 3     | 0 untainted, 1 tainted, 2 missing                |
//! | sink        | 4     | 0 spawn, 1 exec, 2 Function, 3 eval (zeros if none) |
//! | vuln type   | 2     | 0 ACE, 1 ACI (same for every node of a graph)    |

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::provenance::{validate, Position, ProvenanceGraph, ProvenanceNode, SinkKind, Taint, VulnType};

pub const VOCAB_CAPACITY: usize = 100;
pub const OP_RARE: usize = 100;
pub const OP_EMPTY: usize = 101;
pub const OP_SLOTS: usize = 102;
pub const TAINT_OFFSET: usize = OP_SLOTS;
pub const SINK_OFFSET: usize = TAINT_OFFSET + 3;
pub const VULN_OFFSET: usize = SINK_OFFSET + 4;
pub const FEATURE_WIDTH: usize = VULN_OFFSET + 2;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("graph `{package}` failed validation: {violations}")]
    Unvalidated { package: String, violations: String },
    #[error("vocabulary JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("vocabulary indices are not a bijection onto 0..{0}")]
    BadIndices(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub op: String,
    pub index: usize,
    pub count: u64,
}

/// Most frequent operation labels of a training corpus, ranked by
/// descending count with ties broken by ascending label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyDto")]
pub struct OperationVocabulary {
    pub corpus: String,
    pub entries: Vec<VocabEntry>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct VocabularyDto {
    corpus: String,
    entries: Vec<VocabEntry>,
}

impl TryFrom<VocabularyDto> for OperationVocabulary {
    type Error = EncodingError;

    /// Indices must form a permutation of 0..n with n ≤ capacity.
    fn try_from(v: VocabularyDto) -> Result<Self, Self::Error> {
        let n = v.entries.len();
        let mut seen = vec![false; n];
        for e in &v.entries {
            if e.index >= n || std::mem::replace(&mut seen[e.index], true) || n > VOCAB_CAPACITY {
                return Err(EncodingError::BadIndices(n));
            }
        }
        let mut entries = v.entries;
        entries.sort_by_key(|e| e.index);
        Ok(Self::with_entries(v.corpus, entries))
    }
}

impl OperationVocabulary {
    /// Counts are per node occurrence. Empty operation labels are not
    /// vocabulary candidates since they have their own class.
    pub fn build(corpus_id: &str, corpus: &[ProvenanceGraph]) -> Result<Self, EncodingError> {
        if corpus.is_empty() {
            return Err(EncodingError::EmptyCorpus);
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for node in corpus.iter().flat_map(|g| &g.nodes) {
            if !node.operation.is_empty() {
                *counts.entry(node.operation.as_str()).or_default() += 1;
            }
        }
        Ok(Self::from_counts(corpus_id, counts))
    }

    pub fn from_counts<S: AsRef<str>>(corpus_id: &str, counts: impl IntoIterator<Item = (S, u64)>) -> Self {
        let mut ranked: Vec<(String, u64)> =
            counts.into_iter().map(|(s, c)| (s.as_ref().to_owned(), c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(VOCAB_CAPACITY);
        let entries = ranked
            .into_iter()
            .enumerate()
            .map(|(index, (op, count))| VocabEntry { op, index, count })
            .collect();
        Self::with_entries(corpus_id.to_owned(), entries)
    }

    fn with_entries(corpus: String, entries: Vec<VocabEntry>) -> Self {
        let lookup = entries.iter().map(|e| (e.op.clone(), e.index)).collect();
        Self { corpus, entries, lookup }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, op: &str) -> Option<usize> {
        self.lookup.get(op).copied()
    }

    /// Operation class: vocabulary rank, [`OP_RARE`] or [`OP_EMPTY`].
    pub fn op_class(&self, op: &str) -> usize {
        if op.is_empty() {
            OP_EMPTY
        } else {
            self.index_of(op).unwrap_or(OP_RARE)
        }
    }

    /// Identity of the label→class mapping. Counts do not participate, so
    /// two vocabularies that encode identically share an id.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.index.to_le_bytes());
            h.update(e.op.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vocabulary serialization is infallible")
    }

    pub fn from_json(raw: &str) -> Result<Self, EncodingError> {
        Ok(serde_json::from_str(raw)?)
    }
}

/// One-hot feature vector of width [`FEATURE_WIDTH`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedNode {
    pub features: Vec<u8>,
}

impl EncodedNode {
    pub fn from_classes(op: usize, taint: usize, sink: Option<usize>, vuln: usize) -> Self {
        debug_assert!(op < OP_SLOTS && taint < 3 && sink.is_none_or(|s| s < 4) && vuln < 2);
        let mut features = vec![0u8; FEATURE_WIDTH];
        features[op] = 1;
        features[TAINT_OFFSET + taint] = 1;
        if let Some(s) = sink {
            features[SINK_OFFSET + s] = 1;
        }
        features[VULN_OFFSET + vuln] = 1;
        Self { features }
    }

    pub fn hot_indices(&self) -> Vec<usize> {
        self.features.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect()
    }
}

pub fn taint_class(t: Taint) -> usize {
    match t {
        Taint::Untainted => 0,
        Taint::Tainted => 1,
        Taint::Unknown => 2,
    }
}

pub fn sink_class(s: SinkKind) -> usize {
    match s {
        SinkKind::Spawn => 0,
        SinkKind::Exec => 1,
        SinkKind::Function => 2,
        SinkKind::Eval => 3,
    }
}

pub fn vuln_class(v: VulnType) -> usize {
    match v {
        VulnType::Ace => 0,
        VulnType::Aci => 1,
    }
}

pub fn encode_node(n: &ProvenanceNode, vocab: &OperationVocabulary, vt: VulnType) -> EncodedNode {
    EncodedNode::from_classes(
        vocab.op_class(&n.operation),
        taint_class(n.tainted),
        n.sink_type.map(sink_class),
        vuln_class(vt),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedGraph {
    pub package_name: String,
    pub vuln_type: VulnType,
    pub label: Option<bool>,
    /// Fingerprint of the vocabulary used to encode this graph.
    pub vocab_id: String,
    /// Node features in ascending node-id order.
    pub node_features: Vec<EncodedNode>,
    /// (predecessor, successor) pairs indexing `node_features`.
    pub edges: Vec<(usize, usize)>,
    pub sink_file: String,
    pub sink_position: Position,
}

impl EncodedGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    /// Row-major `num_nodes × FEATURE_WIDTH` matrix of 0.0/1.0.
    pub fn feature_matrix(&self) -> Vec<f64> {
        self.node_features.iter().flat_map(|n| n.features.iter().map(|&b| f64::from(b))).collect()
    }
}

/// Encodes a graph that passes [`validate`]. The graph-level vulnerability
/// type is broadcast into every node.
pub fn encode_graph(g: &ProvenanceGraph, vocab: &OperationVocabulary) -> Result<EncodedGraph, EncodingError> {
    let report = validate(g);
    if !report.accepted() {
        return Err(EncodingError::Unvalidated {
            package: g.package_name.clone(),
            violations: serde_json::to_string(&report.violations).unwrap_or_default(),
        });
    }
    let order = g.id_order();
    let index_of: BTreeMap<u64, usize> = order.iter().enumerate().map(|(i, &ni)| (g.nodes[ni].id, i)).collect();
    let node_features = order.iter().map(|&ni| encode_node(&g.nodes[ni], vocab, g.vuln_type)).collect();
    let mut edges = Vec::new();
    for (dst, &ni) in order.iter().enumerate() {
        for p in &g.nodes[ni].flows_from {
            edges.push((index_of[p], dst));
        }
    }
    let sink = g.primary_sink().expect("validated graphs have a sink");
    Ok(EncodedGraph {
        package_name: g.package_name.clone(),
        vuln_type: g.vuln_type,
        label: g.label,
        vocab_id: vocab.fingerprint(),
        node_features,
        edges,
        sink_file: sink.file_path.clone(),
        sink_position: sink.position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::TOYGREP_GRAPH;
    use crate::provenance::parse_graph;

    fn corpus_with_counts(counts: &[(&str, usize)]) -> Vec<ProvenanceGraph> {
        let mut nodes = Vec::new();
        let mut id = 0;
        for (op, c) in counts {
            for _ in 0..*c {
                id += 1;
                nodes.push(ProvenanceNode {
                    id,
                    operation: (*op).into(),
                    value: String::new(),
                    file_path: String::new(),
                    position: Position::default(),
                    tainted: Taint::Tainted,
                    flows_from: vec![],
                    sink_type: None,
                });
            }
        }
        vec![ProvenanceGraph { package_name: "c".into(), vuln_type: VulnType::Aci, nodes, label: None }]
    }

    fn plain_node(op: &str, tainted: Taint, sink: Option<SinkKind>) -> ProvenanceNode {
        ProvenanceNode {
            id: 1,
            operation: op.into(),
            value: String::new(),
            file_path: String::new(),
            position: Position::default(),
            tainted,
            flows_from: vec![],
            sink_type: sink,
        }
    }

    #[test]
    fn layout_width() {
        assert_eq!(FEATURE_WIDTH, 111);
        assert_eq!(VULN_OFFSET, 109);
    }

    #[test]
    fn vocabulary_ranks_by_frequency() {
        let corpus = corpus_with_counts(&[("call:grep", 5), ("string.concat", 30), ("call:exec", 50)]);
        let v = OperationVocabulary::build("toy", &corpus).unwrap();
        assert_eq!(v.index_of("call:exec"), Some(0));
        assert_eq!(v.index_of("string.concat"), Some(1));
        assert_eq!(v.index_of("call:grep"), Some(2));
        assert_eq!(v.entries[0].count, 50);
    }

    #[test]
    fn vocabulary_ties_break_lexicographically_and_cap_at_100() {
        let labels: Vec<String> = (0..150).map(|i| format!("op{i:03}")).collect();
        let v = OperationVocabulary::from_counts("u", labels.iter().rev().map(|l| (l.as_str(), 7)));
        assert_eq!(v.len(), 100);
        for (i, e) in v.entries.iter().enumerate() {
            assert_eq!(e.index, i);
            assert_eq!(e.op, format!("op{i:03}"));
        }
        assert_eq!(v.op_class("op120"), OP_RARE);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(OperationVocabulary::build("e", &[]), Err(EncodingError::EmptyCorpus)));
    }

    #[test]
    fn node_examples() {
        let v = OperationVocabulary::from_counts("t", [("call:exec", 9), ("string.concat", 4)]);
        let n = encode_node(&plain_node("string.concat", Taint::Tainted, None), &v, VulnType::Aci);
        assert_eq!(n.hot_indices(), vec![1, 103, 110]);
        let n = encode_node(&plain_node("", Taint::Unknown, Some(SinkKind::Eval)), &v, VulnType::Ace);
        assert_eq!(n.hot_indices(), vec![101, 104, 108, 109]);
        let n = encode_node(&plain_node("never.seen", Taint::Untainted, None), &v, VulnType::Ace);
        assert_eq!(n.hot_indices(), vec![100, 102, 109]);
    }

    #[test]
    fn toygrep_encodes() {
        let g = parse_graph(TOYGREP_GRAPH.as_bytes()).unwrap();
        let v = OperationVocabulary::build("toygrep", std::slice::from_ref(&g)).unwrap();
        assert_eq!(v.len(), 4);
        let eg = encode_graph(&g, &v).unwrap();
        assert_eq!(eg.num_nodes(), 4);
        assert!(eg.node_features.iter().all(|n| n.features.len() == FEATURE_WIDTH));
        assert_eq!(eg.edges, vec![(0, 2), (1, 2), (2, 3)]);
        assert!(eg.node_features.iter().all(|n| n.features[VULN_OFFSET + 1] == 1));
        assert_eq!(eg.sink_position.start_line, 2);
        assert_eq!(encode_graph(&g, &v).unwrap(), eg);
    }

    #[test]
    fn out_of_vocabulary_graph_saturates_rare_bucket() {
        let g = parse_graph(TOYGREP_GRAPH.as_bytes()).unwrap();
        let v = OperationVocabulary::from_counts("other", [("x", 1)]);
        let eg = encode_graph(&g, &v).unwrap();
        assert!(eg.node_features.iter().all(|n| n.features[OP_RARE] == 1));
    }

    #[test]
    fn single_node_graph() {
        let mut n = plain_node("call:eval", Taint::Tainted, Some(SinkKind::Eval));
        n.id = 4;
        let g = ProvenanceGraph { package_name: "s".into(), vuln_type: VulnType::Ace, nodes: vec![n], label: None };
        let v = OperationVocabulary::build("s", std::slice::from_ref(&g)).unwrap();
        let eg = encode_graph(&g, &v).unwrap();
        assert_eq!(eg.num_nodes(), 1);
        assert!(eg.edges.is_empty());
    }

    #[test]
    fn unvalidated_graph_is_refused() {
        let g = ProvenanceGraph {
            package_name: "n".into(),
            vuln_type: VulnType::Ace,
            nodes: vec![plain_node("a", Taint::Tainted, None)],
            label: None,
        };
        let v = OperationVocabulary::from_counts("t", [("a", 1)]);
        assert!(matches!(encode_graph(&g, &v), Err(EncodingError::Unvalidated { .. })));
    }

    #[test]
    fn count_scaling_does_not_change_encoding() {
        let base = [("a", 3u64), ("b", 9), ("c", 9), ("d", 1)];
        let v1 = OperationVocabulary::from_counts("x", base);
        let v2 = OperationVocabulary::from_counts("x", base.map(|(s, c)| (s, c * 17)));
        assert_eq!(v1.fingerprint(), v2.fingerprint());
        for op in ["a", "b", "c", "d", "e", ""] {
            assert_eq!(v1.op_class(op), v2.op_class(op));
        }
    }

    #[test]
    fn vocabulary_json_round_trip() {
        let v = OperationVocabulary::from_counts("x", [("a", 3u64), ("b", 9)]);
        let back = OperationVocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index_of("b"), Some(0));
        let bad = r#"{"corpus":"x","entries":[{"op":"a","index":0,"count":1},{"op":"b","index":0,"count":1}]}"#;
        assert!(OperationVocabulary::from_json(bad).is_err());
    }
}
