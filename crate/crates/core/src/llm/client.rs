use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompt::{parse_response, strip_reasoning, ThinkDelimiters};
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("rate limited")]
    RateLimited,
    #[error("network failure: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::RateLimited | TransportError::Network(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
}

/// One chat-completion round trip returning the assistant's text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Full URL of an OpenAI-compatible `chat/completions` endpoint.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token; none sends no auth.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub think_delimiters: Vec<ThinkDelimiters>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: "http://localhost:8000/v1/chat/completions".into(),
            model: String::new(),
            api_key_env: Some("LLM_API_KEY".into()),
            timeout_secs: 300,
            think_delimiters: vec![ThinkDelimiters::default()],
        }
    }
}

pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &EndpointConfig) -> Result<Self, LlmError> {
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingApiKey(var.clone()))?),
            None => None,
        };
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build();
        Ok(Self { agent: config.into(), url: cfg.url.clone(), api_key })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let body = serde_json::json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        });
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| TransportError::Network(e.to_string()))?;
        match status {
            200..=299 => {}
            429 => return Err(TransportError::RateLimited),
            _ => return Err(TransportError::Http { status, body: text }),
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| TransportError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))
    }
}

/// Replays a fixed sequence of outcomes, one per call.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    script: Mutex<VecDeque<Result<String, TransportError>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new(script: impl IntoIterator<Item = Result<String, TransportError>>) -> Self {
        Self { script: Mutex::new(script.into_iter().collect()), requests: Mutex::default() }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("poisoned").clone()
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.requests.lock().expect("poisoned").push(request.clone());
        self.script
            .lock()
            .expect("poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Network("script exhausted".into())))
    }
}

/// Exponential backoff: retry `k` (1-based) waits `base_delay · 2^(k−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmVerdict {
    pub raw_response: String,
    pub verdict: bool,
    pub reasoning_stripped: bool,
    pub attempts: u32,
}

/// Sends `prompt` at temperature 0, retrying rate-limit and network
/// failures per `policy`, and parses the answer. `sleep` performs the
/// backoff waits.
pub fn classify_zero_shot(
    transport: &dyn ChatTransport,
    model: &str,
    prompt: &str,
    delimiters: &[ThinkDelimiters],
    policy: RetryPolicy,
    sleep: &mut dyn FnMut(Duration),
) -> Result<LlmVerdict, LlmError> {
    let request = ChatRequest { model: model.to_string(), prompt: prompt.to_string(), temperature: 0.0 };
    let mut attempts = 0;
    loop {
        attempts += 1;
        match transport.complete(&request) {
            Ok(raw) => {
                let (_, reasoning_stripped) = strip_reasoning(&raw, delimiters);
                let verdict = parse_response(&raw, delimiters);
                return Ok(LlmVerdict { raw_response: raw, verdict, reasoning_stripped, attempts });
            }
            Err(e) if e.is_retryable() && attempts <= policy.max_retries => sleep(policy.delay(attempts)),
            Err(source) => return Err(LlmError::Transport { attempts, source }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub package: String,
    pub model: String,
    pub prompt_sha256: String,
    pub token_estimate: usize,
    pub token_heuristic: String,
    pub raw_response: Option<String>,
    pub verdict: Option<bool>,
    pub reasoning_stripped: Option<bool>,
    pub attempts: u32,
    pub error: Option<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Appends one JSON line per record.
pub fn append_transcript(path: &Path, records: &[TranscriptRecord]) -> Result<(), LlmError> {
    let io = |source| LlmError::Io { path: path.to_path_buf(), source };
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(f, "{line}").map_err(io)?;
    }
    Ok(())
}
