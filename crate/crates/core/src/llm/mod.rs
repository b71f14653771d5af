//! Zero-shot triage through a chat-completion endpoint: a sink-centred
//! snippet, a fixed prompt, and a Yes/No verdict parser.

mod client;
mod prompt;
mod snippet;

pub use client::{
    append_transcript, classify_zero_shot, prompt_hash, unix_ms, ChatRequest, ChatTransport, EndpointConfig,
    HttpTransport, LlmVerdict, RetryPolicy, ScriptedTransport, TranscriptRecord, TransportError,
};
pub use prompt::{build_prompt, parse_response, strip_reasoning, ThinkDelimiters, PROMPT_TEMPLATE, SNIPPET_PLACEHOLDER};
pub use snippet::{estimate_tokens, extract_snippet, snippet_from_text, SnippetRequest, DEFAULT_BUDGET, TOKEN_HEURISTIC};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: sink line {line} outside file of {lines} lines")]
    LineOutOfRange { path: PathBuf, line: usize, lines: usize },
    #[error("{0}")]
    BadRequest(String),
    #[error("request failed after {attempts} attempt(s): {source}")]
    Transport { attempts: u32, source: TransportError },
    #[error("API key variable `{0}` is not set")]
    MissingApiKey(String),
}
