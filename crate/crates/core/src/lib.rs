//! Triage of taint-flow reports from dynamic taint analysis of Node.js
//! packages: provenance-graph parsing, categorical encoding, classical and
//! gated-graph classifiers, zero-shot LLM prompting, and the evaluation
//! machinery used to rank reports for analyst review.

pub mod classical;
pub mod encoding;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod exec;
pub mod fixtures;
pub mod ggnn;
pub mod llm;
pub mod manifest;
pub mod provenance;
pub mod synth;

pub use exec::Exec;
