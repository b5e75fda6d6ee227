//! Uniform single-turn completion interface over interchangeable backends.
//!
//! Three backends share one trait: a live HTTP backend speaking the
//! OpenAI-compatible chat-completions wire format, a record/replay backend
//! for deterministic offline runs, and a scripted backend for tests.
//! Replay is keyed by a digest of (model, prompt), so any drift in prompt
//! construction surfaces as a replay miss instead of a silently misaligned
//! response.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::TokenUsage;

/// Environment variable holding the live-backend credential.
pub const API_KEY_ENV: &str = "ASP_FORGE_API_KEY";
/// Environment variable overriding the live-backend base URL.
pub const BASE_URL_ENV: &str = "ASP_FORGE_BASE_URL";

/// A single-turn completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
}

/// A completion with whatever accounting the backend can report.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub text: String,
    pub token_usage: TokenUsage,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("auth error: {0}")]
    Auth(String),
    #[error("http status {status} after {attempts} attempt(s): {body}")]
    Status {
        status: u16,
        attempts: u32,
        body: String,
    },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("replay miss: no stored response for digest {digest}")]
    ReplayMiss { digest: String },
    #[error("scripted backend exhausted after {served} response(s)")]
    ScriptExhausted { served: usize },
    #[error("replay store io: {0}")]
    StoreIo(String),
}

/// Anything that can serve single-turn completions. Implementations must be
/// callable concurrently from multiple sessions.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError>;
}

/// Digest keying replay lookups: SHA-256 over the model id and prompt bytes.
pub fn request_digest(model_id: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(prompt.as_bytes());
    hex_encode(&hasher.finalize())
}

fn hex_encode(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// One line of a replay store file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub digest: String,
    pub model: String,
    pub prompt: String,
    pub response: String,
    pub usage: TokenUsage,
}

/// An ordered collection of recorded completions.
///
/// Lookups consume records in FIFO order among equal digests, so repeated
/// identical prompts replay in recording order.
#[derive(Debug, Default)]
pub struct ReplayStore {
    records: Vec<ReplayRecord>,
}

impl ReplayStore {
    pub fn new() -> Self {
        ReplayStore::default()
    }

    pub fn push(&mut self, record: ReplayRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ReplayRecord] {
        &self.records
    }

    /// Load a JSONL store, one record per line.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file = fs::File::open(path)
            .map_err(|e| GatewayError::StoreIo(format!("{}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::StoreIo(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(&line).map_err(|e| {
                GatewayError::StoreIo(format!("{} line {}: {e}", path.display(), n + 1))
            })?;
            records.push(record);
        }
        Ok(ReplayStore { records })
    }

    /// Persist as JSONL. Reloading yields byte-identical replay behavior.
    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)
                    .map_err(|e| GatewayError::StoreIo(format!("{}: {e}", parent.display())))?;
            }
        }
        let mut file = fs::File::create(path)
            .map_err(|e| GatewayError::StoreIo(format!("{}: {e}", path.display())))?;
        for record in &self.records {
            let line = serde_json::to_string(record)
                .map_err(|e| GatewayError::StoreIo(e.to_string()))?;
            writeln!(file, "{line}")
                .map_err(|e| GatewayError::StoreIo(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Replay backend: serves recorded responses keyed by request digest.
pub struct ReplayBackend {
    queues: Mutex<HashMap<String, VecDeque<(String, TokenUsage)>>>,
}

impl ReplayBackend {
    pub fn new(store: &ReplayStore) -> Self {
        let mut queues: HashMap<String, VecDeque<(String, TokenUsage)>> = HashMap::new();
        for record in store.records() {
            queues
                .entry(record.digest.clone())
                .or_default()
                .push_back((record.response.clone(), record.usage));
        }
        ReplayBackend {
            queues: Mutex::new(queues),
        }
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let digest = request_digest(&request.model_id, &request.prompt);
        let mut queues = self.queues.lock().unwrap();
        let entry = queues
            .get_mut(&digest)
            .and_then(|q| q.pop_front())
            .ok_or(GatewayError::ReplayMiss {
                digest: digest.clone(),
            })?;
        Ok(LlmResponse {
            text: entry.0,
            token_usage: entry.1,
            latency_ms: 0,
        })
    }
}

/// Scripted backend: returns primed responses in order, ignoring the prompt.
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    served: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            served: Mutex::new(0),
        }
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, _request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let mut responses = self.responses.lock().unwrap();
        match responses.pop_front() {
            Some(text) => {
                *self.served.lock().unwrap() += 1;
                Ok(LlmResponse {
                    text,
                    token_usage: TokenUsage::default(),
                    latency_ms: 0,
                })
            }
            None => Err(GatewayError::ScriptExhausted {
                served: *self.served.lock().unwrap(),
            }),
        }
    }
}

/// Wraps another backend and records every exchange for later replay.
pub struct RecordingBackend<B> {
    inner: B,
    store: Mutex<ReplayStore>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            store: Mutex::new(ReplayStore::new()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        self.store.lock().unwrap().save(path)
    }

    pub fn into_store(self) -> ReplayStore {
        self.store.into_inner().unwrap()
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let response = self.inner.complete(request)?;
        self.store.lock().unwrap().push(ReplayRecord {
            digest: request_digest(&request.model_id, &request.prompt),
            model: request.model_id.clone(),
            prompt: request.prompt.clone(),
            response: response.text.clone(),
            usage: response.token_usage,
        });
        Ok(response)
    }
}

/// Retry policy for the live backend: transient failures (429 and 5xx) are
/// retried with exponential backoff up to an attempt cap.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base: Duration::from_secs(1),
        }
    }
}

/// Live backend speaking the OpenAI-compatible chat-completions protocol.
pub struct HttpBackend {
    base_url: String,
    api_key: String,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    /// Build from explicit settings. The base URL should point at the API
    /// root; `/chat/completions` is appended.
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, retry: RetryPolicy) -> Self {
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            retry,
            agent: ureq::Agent::new_with_defaults(),
        }
    }

    /// Build from `ASP_FORGE_API_KEY` and `ASP_FORGE_BASE_URL`, with the
    /// given fallback base URL when the env var is unset.
    pub fn from_env(fallback_base_url: Option<&str>) -> Result<Self, GatewayError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| GatewayError::Auth(format!("{API_KEY_ENV} is not set")))?;
        let base_url = std::env::var(BASE_URL_ENV)
            .ok()
            .or_else(|| fallback_base_url.map(str::to_string))
            .ok_or_else(|| {
                GatewayError::Transport(format!("no base URL: set {BASE_URL_ENV} or configure one"))
            })?;
        Ok(HttpBackend::new(base_url, api_key, RetryPolicy::default()))
    }

    fn post_once(&self, request: &LlmRequest) -> Result<LlmResponse, (bool, GatewayError)> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = ChatRequest {
            model: &request.model_id,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let started = Instant::now();
        let result = self
            .agent
            .post(&url)
            .header("authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let latency_ms = started.elapsed().as_millis() as u64;
        let mut response = match result {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) => {
                if code == 401 || code == 403 {
                    return Err((false, GatewayError::Auth(format!("http status {code}"))));
                }
                let retryable = code == 429 || code >= 500;
                return Err((
                    retryable,
                    GatewayError::Status {
                        status: code,
                        attempts: 0,
                        body: String::new(),
                    },
                ));
            }
            Err(e) => return Err((true, GatewayError::Transport(e.to_string()))),
        };
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| (false, GatewayError::MalformedResponse(e.to_string())))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or((
                false,
                GatewayError::MalformedResponse("no choices[0].message.content".into()),
            ))?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(LlmResponse {
            text,
            token_usage: TokenUsage {
                input: usage.prompt_tokens,
                output: usage.completion_tokens,
            },
            latency_ms,
        })
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.post_once(request) {
                Ok(response) => return Ok(response),
                Err((retryable, err)) => {
                    if !retryable || attempt >= self.retry.max_attempts {
                        return Err(match err {
                            GatewayError::Status { status, body, .. } => GatewayError::Status {
                                status,
                                attempts: attempt,
                                body,
                            },
                            other => other,
                        });
                    }
                    let backoff = self.retry.backoff_base * 2u32.pow(attempt - 1);
                    std::thread::sleep(backoff);
                }
            }
        }
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        (**self).complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> LlmRequest {
        LlmRequest {
            model_id: "test-model".into(),
            prompt: prompt.into(),
            temperature: 1.0,
            max_output_tokens: None,
        }
    }

    #[test]
    fn scripted_backend_echoes_primed_responses() {
        let backend = ScriptedBackend::new(["hello"]);
        assert_eq!(backend.complete(&req("hi")).unwrap().text, "hello");
        assert!(matches!(
            backend.complete(&req("hi")),
            Err(GatewayError::ScriptExhausted { served: 1 })
        ));
    }

    #[test]
    fn digest_depends_only_on_model_and_prompt_bytes() {
        let a = request_digest("m", "prompt");
        assert_eq!(a, request_digest("m", "prompt"));
        assert_ne!(a, request_digest("m", "prompt "));
        assert_ne!(a, request_digest("m2", "prompt"));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn record_then_replay_round_trips() {
        let recorder = RecordingBackend::new(ScriptedBackend::new(["first", "second"]));
        recorder.complete(&req("p1")).unwrap();
        recorder.complete(&req("p2")).unwrap();
        let store = recorder.into_store();
        let replay = ReplayBackend::new(&store);
        assert_eq!(replay.complete(&req("p2")).unwrap().text, "second");
        assert_eq!(replay.complete(&req("p1")).unwrap().text, "first");
    }

    #[test]
    fn equal_prompts_replay_in_recording_order() {
        let recorder = RecordingBackend::new(ScriptedBackend::new(["one", "two"]));
        recorder.complete(&req("same")).unwrap();
        recorder.complete(&req("same")).unwrap();
        let replay = ReplayBackend::new(&recorder.into_store());
        assert_eq!(replay.complete(&req("same")).unwrap().text, "one");
        assert_eq!(replay.complete(&req("same")).unwrap().text, "two");
        assert!(matches!(
            replay.complete(&req("same")),
            Err(GatewayError::ReplayMiss { .. })
        ));
    }

    #[test]
    fn empty_store_misses_with_digest() {
        let replay = ReplayBackend::new(&ReplayStore::new());
        match replay.complete(&req("anything")) {
            Err(GatewayError::ReplayMiss { digest }) => {
                assert_eq!(digest, request_digest("test-model", "anything"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn store_persists_and_reloads_with_stable_digests() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let recorder = RecordingBackend::new(ScriptedBackend::new(["a", "b"]));
        recorder.complete(&req("x")).unwrap();
        recorder.complete(&req("y")).unwrap();
        recorder.save(&path).unwrap();

        let reloaded = ReplayStore::load(&path).unwrap();
        assert_eq!(reloaded.len(), 2);
        for record in reloaded.records() {
            assert_eq!(record.digest, request_digest(&record.model, &record.prompt));
        }
        let replay = ReplayBackend::new(&reloaded);
        assert_eq!(replay.complete(&req("y")).unwrap().text, "b");
    }
}
