//! Generation clients: the live chat-completions client with retry and rate
//! limiting, and the fixture-driven stub used for reproducible runs.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Decoding {
    pub const JUDGE: Decoding = Decoding { temperature: 0.0, max_tokens: 1024 };
    pub const RESPONSE: Decoding = Decoding { temperature: 0.0, max_tokens: 2048 };
    pub const SAMPLING: Decoding = Decoding { temperature: 0.7, max_tokens: 2048 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_text: String,
    pub user_text: String,
    /// Image references: file paths, `data:` URLs, or http(s) URLs.
    pub attachments: Vec<String>,
    pub decoding: Decoding,
}

impl GenerationRequest {
    pub fn new(user_text: impl Into<String>, decoding: Decoding) -> Self {
        GenerationRequest {
            system_text: String::new(),
            user_text: user_text.into(),
            attachments: Vec::new(),
            decoding,
        }
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.system_text = system.into();
        self
    }

    pub fn with_attachment(mut self, image: Option<&str>) -> Self {
        if let Some(image) = image {
            self.attachments.push(image.to_string());
        }
        self
    }

    /// Stable SHA-256 over the canonical JSON encoding of the request.
    pub fn stable_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("client configuration error: {0}")]
    Config(String),
    #[error("credential environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("request rejected: {0}")]
    InvalidRequest(String),
    #[error("cannot resolve attachment `{reference}`: {reason}")]
    Attachment { reference: String, reason: String },
    #[error("giving up after {attempts} attempt(s): {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no fixture matches request {hash}")]
    FixtureMiss { hash: String },
    #[error("cannot read fixtures {path}: {reason}")]
    Fixture { path: String, reason: String },
}

/// Anything that turns a [`GenerationRequest`] into text.
pub trait GenerationClient: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError>;

    /// Short description, used in run manifests. Must not contain secrets.
    fn describe(&self) -> String;
}

impl<T: GenerationClient + ?Sized> GenerationClient for Arc<T> {
    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        (**self).generate(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

// ---------------------------------------------------------------------------
// Stub client

/// One scripted response. A record matches by exact request hash or, as an
/// authoring convenience, by a substring of the user text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

impl FixtureRecord {
    pub fn by_hash(hash: impl Into<String>, response: impl Into<String>) -> Self {
        FixtureRecord { hash: Some(hash.into()), contains: None, response: response.into() }
    }

    pub fn by_contains(needle: impl Into<String>, response: impl Into<String>) -> Self {
        FixtureRecord { hash: None, contains: Some(needle.into()), response: response.into() }
    }

    fn matches(&self, hash: &str, request: &GenerationRequest) -> bool {
        match (&self.hash, &self.contains) {
            (Some(h), _) => h == hash,
            (None, Some(needle)) => request.user_text.contains(needle.as_str()),
            (None, None) => false,
        }
    }
}

/// Deterministic client answering from an ordered fixture list. The first
/// matching record wins. On a miss, strict mode fails with
/// [`ClientError::FixtureMiss`]; lenient mode picks a record by the request
/// hash modulo the record count.
pub struct StubClient {
    records: Vec<FixtureRecord>,
    strict: bool,
    label: String,
    log: Mutex<Vec<GenerationRequest>>,
}

impl StubClient {
    pub fn new(records: Vec<FixtureRecord>, strict: bool) -> Self {
        StubClient { records, strict, label: "inline".into(), log: Mutex::new(Vec::new()) }
    }

    pub fn from_file(path: &Path, strict: bool) -> Result<Self, ClientError> {
        let fail = |reason: String| ClientError::Fixture { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let records: Vec<FixtureRecord> = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        if let Some(i) = records.iter().position(|r| r.hash.is_none() && r.contains.is_none()) {
            return Err(fail(format!("record {i} has neither `hash` nor `contains`")));
        }
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        let mut stub = StubClient::new(records, strict);
        stub.label = format!("{}#{}", path.display(), &digest[..12]);
        Ok(stub)
    }

    /// Number of `generate` calls received so far.
    pub fn calls(&self) -> usize {
        self.log.lock().expect("stub log").len()
    }

    pub fn requests(&self) -> Vec<GenerationRequest> {
        self.log.lock().expect("stub log").clone()
    }
}

impl GenerationClient for StubClient {
    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        self.log.lock().expect("stub log").push(request.clone());
        let hash = request.stable_hash();
        if let Some(r) = self.records.iter().find(|r| r.matches(&hash, request)) {
            return Ok(r.response.clone());
        }
        if self.strict || self.records.is_empty() {
            return Err(ClientError::FixtureMiss { hash });
        }
        let bucket = u64::from_str_radix(&hash[..16], 16).expect("hex digest");
        Ok(self.records[(bucket % self.records.len() as u64) as usize].response.clone())
    }

    fn describe(&self) -> String {
        format!("stub:{}:{}", self.label, if self.strict { "strict" } else { "lenient" })
    }
}

/// Wraps a client and captures every exchange as a hash-keyed fixture, so a
/// live session can be replayed later through [`StubClient`].
pub struct RecordingClient {
    inner: Arc<dyn GenerationClient>,
    captured: Mutex<Vec<FixtureRecord>>,
}

impl RecordingClient {
    pub fn new(inner: Arc<dyn GenerationClient>) -> Self {
        RecordingClient { inner, captured: Mutex::new(Vec::new()) }
    }

    pub fn transcript(&self) -> Vec<FixtureRecord> {
        self.captured.lock().expect("recording").clone()
    }

    pub fn write_fixtures(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(&self.transcript())?;
        std::fs::write(path, json + "\n")
    }
}

impl GenerationClient for RecordingClient {
    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        let text = self.inner.generate(request)?;
        self.captured
            .lock()
            .expect("recording")
            .push(FixtureRecord::by_hash(request.stable_hash(), text.clone()));
        Ok(text)
    }

    fn describe(&self) -> String {
        format!("recording({})", self.inner.describe())
    }
}

// ---------------------------------------------------------------------------
// Retry and rate limiting

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { base: Duration::from_secs(1), factor: 2, max_attempts: 5 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base * self.factor.saturating_pow(retry.saturating_sub(1))
    }
}

/// Token bucket holding up to `requests_per_minute` tokens, refilled
/// continuously. A rate of zero disables limiting.
pub struct TokenBucket {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(requests_per_minute: u32) -> Self {
        Self::new_at(requests_per_minute, Instant::now())
    }

    pub fn new_at(requests_per_minute: u32, now: Instant) -> Self {
        let capacity = f64::from(requests_per_minute);
        TokenBucket { capacity, per_sec: capacity / 60.0, state: Mutex::new((capacity, now)) }
    }

    /// Take a token at `now`, or report how long until one is available.
    pub fn try_acquire_at(&self, now: Instant) -> Result<(), Duration> {
        if self.capacity == 0.0 {
            return Ok(());
        }
        let mut state = self.state.lock().expect("token bucket");
        let (tokens, last) = *state;
        let elapsed = now.saturating_duration_since(last).as_secs_f64();
        let tokens = (tokens + elapsed * self.per_sec).min(self.capacity);
        if tokens >= 1.0 {
            *state = (tokens - 1.0, now.max(last));
            Ok(())
        } else {
            *state = (tokens, now.max(last));
            Err(Duration::from_secs_f64((1.0 - tokens) / self.per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire_at(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
}

// ---------------------------------------------------------------------------
// Live client

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Raw HTTP layer. Errors are connection-level failures (always transient).
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: &str, body: &Value) -> Result<HttpReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: &str, body: &Value) -> Result<HttpReply, String> {
        let mut resp = self
            .agent
            .post(url)
            .header("Authorization", &format!("Bearer {bearer}"))
            .send_json(body)
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

fn is_transient(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

/// Resolve an image reference to a URL usable in a chat request.
pub fn resolve_attachment(reference: &str) -> Result<String, ClientError> {
    if reference.starts_with("data:") || reference.starts_with("http://") || reference.starts_with("https://") {
        return Ok(reference.to_string());
    }
    let path = Path::new(reference);
    let bytes = std::fs::read(path).map_err(|e| ClientError::Attachment {
        reference: reference.to_string(),
        reason: e.to_string(),
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let mime = match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "bmp" => "image/bmp",
        _ => "application/octet-stream",
    };
    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{mime};base64,{b64}"))
}

/// Build the chat-completions request body.
pub fn chat_body(model: &str, request: &GenerationRequest) -> Result<Value, ClientError> {
    if request.user_text.trim().is_empty() {
        return Err(ClientError::InvalidRequest("user_text is empty".into()));
    }
    let mut messages = Vec::new();
    if !request.system_text.is_empty() {
        messages.push(json!({"role": "system", "content": request.system_text}));
    }
    let mut content = vec![json!({"type": "text", "text": request.user_text})];
    for a in &request.attachments {
        content.push(json!({"type": "image_url", "image_url": {"url": resolve_attachment(a)?}}));
    }
    messages.push(json!({"role": "user", "content": content}));
    Ok(json!({
        "model": model,
        "messages": messages,
        "temperature": request.decoding.temperature,
        "max_tokens": request.decoding.max_tokens,
    }))
}

pub fn parse_chat_reply(body: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ClientError::Malformed("missing choices[0].message.content".into()))
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct HttpClient {
    endpoint: String,
    model: String,
    api_key: String,
    transport: Box<dyn Transport>,
    retry: RetryPolicy,
    bucket: TokenBucket,
    sleep: Sleeper,
}

impl fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl HttpClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        transport: Box<dyn Transport>,
        requests_per_minute: u32,
    ) -> Self {
        HttpClient {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            transport,
            retry: RetryPolicy::default(),
            bucket: TokenBucket::new(requests_per_minute),
            sleep: Arc::new(std::thread::sleep),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }
}

impl GenerationClient for HttpClient {
    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        let body = chat_body(&self.model, request)?;
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            if attempt > 1 {
                (self.sleep)(self.retry.delay(attempt - 1));
            }
            self.bucket.acquire();
            match self.transport.post_json(&self.endpoint, &self.api_key, &body) {
                Ok(reply) if (200..300).contains(&reply.status) => return parse_chat_reply(&reply.body),
                Ok(reply) if is_transient(reply.status) => {
                    last = format!("HTTP {}", reply.status);
                    log::warn!("attempt {attempt} to {} failed: {last}", self.endpoint);
                }
                Ok(reply) => return Err(ClientError::Http { status: reply.status, body: reply.body }),
                Err(e) => {
                    log::warn!("attempt {attempt} to {} failed: {e}", self.endpoint);
                    last = e;
                }
            }
        }
        Err(ClientError::Exhausted { attempts: self.retry.max_attempts.max(1), last })
    }

    fn describe(&self) -> String {
        format!("live:{}:{}", self.endpoint, self.model)
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientMode {
    #[default]
    Live,
    Stub,
}

fn default_rpm() -> u32 {
    60
}

fn default_timeout() -> u64 {
    120
}

fn default_strict() -> bool {
    true
}

/// Client configuration file. Credentials are never stored here, only the
/// name of the environment variable holding them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    #[serde(default)]
    pub mode: ClientMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
    #[serde(default = "default_strict")]
    pub strict: bool,
}

impl ClientConfig {
    pub fn stub(fixtures: impl Into<PathBuf>) -> Self {
        ClientConfig {
            mode: ClientMode::Stub,
            endpoint: None,
            model: None,
            api_key_env: None,
            requests_per_minute: default_rpm(),
            timeout_secs: default_timeout(),
            fixtures: Some(fixtures.into()),
            strict: true,
        }
    }

    /// Load from JSON; relative fixture paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ClientConfig = serde_json::from_str(&text)
            .map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(f), Some(dir)) = (&cfg.fixtures, path.parent()) {
            if f.is_relative() {
                cfg.fixtures = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    /// Build a client. Live mode checks the credential before any network use.
    pub fn build(&self) -> Result<Arc<dyn GenerationClient>, ClientError> {
        self.build_with_env(|k| std::env::var(k).ok())
    }

    pub fn build_with_env(
        &self,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Arc<dyn GenerationClient>, ClientError> {
        match self.mode {
            ClientMode::Stub => {
                let path = self
                    .fixtures
                    .as_ref()
                    .ok_or_else(|| ClientError::Config("stub mode requires `fixtures`".into()))?;
                Ok(Arc::new(StubClient::from_file(path, self.strict)?))
            }
            ClientMode::Live => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| ClientError::Config("live mode requires `endpoint`".into()))?;
                let model = self
                    .model
                    .clone()
                    .ok_or_else(|| ClientError::Config("live mode requires `model`".into()))?;
                let var = self
                    .api_key_env
                    .clone()
                    .ok_or_else(|| ClientError::Config("live mode requires `api_key_env`".into()))?;
                let key = env(&var)
                    .filter(|k| !k.is_empty())
                    .ok_or(ClientError::MissingCredential(var))?;
                let transport = UreqTransport::new(Duration::from_secs(self.timeout_secs));
                Ok(Arc::new(HttpClient::new(
                    endpoint,
                    model,
                    key,
                    Box::new(transport),
                    self.requests_per_minute,
                )))
            }
        }
    }
}

/// Digest over client configurations for run manifests.
pub fn config_digest(configs: &HashMap<&str, &ClientConfig>) -> String {
    let mut keys: Vec<_> = configs.keys().copied().collect();
    keys.sort_unstable();
    let mut h = Sha256::new();
    for k in keys {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(serde_json::to_vec(configs[k]).expect("config serializes"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
