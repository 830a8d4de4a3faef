//! Completion gateway: one `generate` entry point over live HTTP backends,
//! a content-addressed record/replay store, and scripted in-process backends.
//!
//! The gateway enforces an in-flight ceiling, an optional sliding-window rate
//! limit and an optional total request budget. Backends only see requests
//! that already passed validation.

use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ENV_API_KEY: &str = "MODEL_API_KEY";
pub const ENV_API_BASE: &str = "MODEL_API_BASE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    FillInMiddle,
    LeftToRight,
    Chat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptParts {
    pub prefix: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suffix: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
}

impl GenParams {
    /// StarCoder editor-extension defaults.
    pub const fn starcoder() -> Self {
        GenParams { temperature: 0.2, top_p: 0.95, max_new_tokens: 150 }
    }

    /// Qwen2.5-Coder recommended completion settings.
    pub const fn qwen() -> Self {
        GenParams { temperature: 0.3, top_p: 0.95, max_new_tokens: 150 }
    }

    /// Greedy decoding with a long budget for the repair stages.
    pub const fn repair() -> Self {
        GenParams { temperature: 0.0, top_p: 0.95, max_new_tokens: 2048 }
    }

    /// Completion preset by model family name; unknown names get StarCoder's.
    pub fn completion_preset(model: &str) -> Self {
        if model.to_ascii_lowercase().contains("qwen") {
            Self::qwen()
        } else {
            Self::starcoder()
        }
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.max_new_tokens == 0 {
            return Err("max_new_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub mode: GenMode,
    pub prompt: PromptParts,
    pub params: GenParams,
    pub model_name: String,
}

impl GenRequest {
    pub fn fill_in_middle(model: &str, prefix: &str, suffix: &str, params: GenParams) -> Self {
        GenRequest {
            mode: GenMode::FillInMiddle,
            prompt: PromptParts { prefix: prefix.into(), suffix: Some(suffix.into()), messages: vec![] },
            params,
            model_name: model.into(),
        }
    }

    pub fn left_to_right(model: &str, prefix: &str, params: GenParams) -> Self {
        GenRequest {
            mode: GenMode::LeftToRight,
            prompt: PromptParts { prefix: prefix.into(), ..Default::default() },
            params,
            model_name: model.into(),
        }
    }

    pub fn chat(model: &str, messages: Vec<ChatMessage>, params: GenParams) -> Self {
        GenRequest {
            mode: GenMode::Chat,
            prompt: PromptParts { messages, ..Default::default() },
            params,
            model_name: model.into(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        self.params.validate().map_err(GatewayError::InvalidRequest)?;
        match self.mode {
            GenMode::FillInMiddle if self.prompt.suffix.is_none() => {
                Err(GatewayError::InvalidRequest("fill-in-the-middle requires a suffix".into()))
            }
            GenMode::Chat if self.prompt.messages.is_empty() => {
                Err(GatewayError::InvalidRequest("chat requires at least one message".into()))
            }
            _ => Ok(()),
        }
    }

    /// Hex SHA-256 over the canonical JSON encoding of the request.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenResponse {
    pub text: String,
    pub backend: String,
    pub latency_ms: u64,
    pub cached: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend `{backend}` unavailable: {message}")]
    BackendUnavailable { backend: String, message: String },
    #[error("no recorded response for request {digest} in strict replay mode")]
    ReplayMiss { digest: String },
    #[error("request budget of {budget} exhausted")]
    BudgetExceeded { budget: u64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("replay store {path}: {message}")]
    Store { path: String, message: String },
}

/// What a backend hands back before the gateway adds timing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub cached: bool,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &GenRequest) -> Result<Completion, GatewayError>;
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

/// In-process backend driven by a closure. Used for offline fixtures and as
/// the inner backend when recording.
pub struct ScriptedBackend<F> {
    name: String,
    script: F,
}

impl<F> ScriptedBackend<F>
where
    F: Fn(&GenRequest) -> String + Send + Sync,
{
    pub fn new(name: impl Into<String>, script: F) -> Self {
        ScriptedBackend { name: name.into(), script }
    }
}

impl<F> Backend for ScriptedBackend<F>
where
    F: Fn(&GenRequest) -> String + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &GenRequest) -> Result<Completion, GatewayError> {
        Ok(Completion { text: (self.script)(req), cached: false })
    }
}

// ---------------------------------------------------------------------------
// Replay store
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub digest: String,
    pub request: GenRequest,
    pub response: String,
}

/// Content-addressed JSONL store: concurrent reads, serialized appends.
pub struct ReplayStore {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, ReplayEntry>>,
    writer: Mutex<()>,
}

impl ReplayStore {
    pub fn in_memory() -> Self {
        ReplayStore { path: None, entries: RwLock::new(HashMap::new()), writer: Mutex::new(()) }
    }

    /// `<dir>/<backend>.jsonl`.
    pub fn path_for(dir: &Path, backend: &str) -> PathBuf {
        dir.join(format!("{backend}.jsonl"))
    }

    /// Loads the store at `path`; a missing file yields an empty store that
    /// will be created on first write.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let store_err = |message: String| GatewayError::Store { path: path.display().to_string(), message };
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| store_err(e.to_string()))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| store_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: ReplayEntry =
                    serde_json::from_str(&line).map_err(|e| store_err(format!("line {}: {e}", i + 1)))?;
                entries.entry(entry.digest.clone()).or_insert(entry);
            }
        }
        Ok(ReplayStore { path: Some(path.to_path_buf()), entries: RwLock::new(entries), writer: Mutex::new(()) })
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("replay store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str) -> Option<String> {
        self.entries.read().expect("replay store lock").get(digest).map(|e| e.response.clone())
    }

    /// Records a response; an existing digest keeps its first response.
    pub fn insert(&self, request: &GenRequest, response: &str) -> Result<(), GatewayError> {
        let _guard = self.writer.lock().expect("replay writer lock");
        let digest = request.digest();
        if self.entries.read().expect("replay store lock").contains_key(&digest) {
            return Ok(());
        }
        let entry = ReplayEntry { digest: digest.clone(), request: request.clone(), response: response.to_string() };
        if let Some(path) = &self.path {
            let store_err = |message: String| GatewayError::Store { path: path.display().to_string(), message };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| store_err(e.to_string()))?;
            }
            let mut f =
                OpenOptions::new().create(true).append(true).open(path).map_err(|e| store_err(e.to_string()))?;
            let mut line = serde_json::to_string(&entry).map_err(|e| store_err(e.to_string()))?;
            line.push('\n');
            f.write_all(line.as_bytes()).map_err(|e| store_err(e.to_string()))?;
        }
        self.entries.write().expect("replay store lock").insert(digest, entry);
        Ok(())
    }

    /// Rewrites the backing file sorted by digest so recordings made by
    /// concurrent workers are byte-stable.
    pub fn compact(&self) -> Result<(), GatewayError> {
        let Some(path) = &self.path else { return Ok(()) };
        let _guard = self.writer.lock().expect("replay writer lock");
        let entries = self.entries.read().expect("replay store lock");
        let mut sorted: Vec<&ReplayEntry> = entries.values().collect();
        sorted.sort_by(|a, b| a.digest.cmp(&b.digest));
        let mut out = String::new();
        for e in sorted {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        fs::write(path, out)
            .map_err(|e| GatewayError::Store { path: path.display().to_string(), message: e.to_string() })
    }
}

pub enum ReplayMode {
    /// Every request must already be recorded.
    Strict,
    /// Misses go to the inner backend and are recorded.
    Record(Box<dyn Backend>),
}

pub struct ReplayBackend {
    name: String,
    store: Arc<ReplayStore>,
    mode: ReplayMode,
}

impl ReplayBackend {
    pub fn strict(name: impl Into<String>, store: Arc<ReplayStore>) -> Self {
        ReplayBackend { name: name.into(), store, mode: ReplayMode::Strict }
    }

    pub fn recording(name: impl Into<String>, store: Arc<ReplayStore>, inner: Box<dyn Backend>) -> Self {
        ReplayBackend { name: name.into(), store, mode: ReplayMode::Record(inner) }
    }

    pub fn store(&self) -> &Arc<ReplayStore> {
        &self.store
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &GenRequest) -> Result<Completion, GatewayError> {
        let digest = req.digest();
        if let Some(text) = self.store.get(&digest) {
            return Ok(Completion { text, cached: true });
        }
        match &self.mode {
            ReplayMode::Strict => Err(GatewayError::ReplayMiss { digest }),
            ReplayMode::Record(inner) => {
                let fresh = inner.complete(req)?;
                self.store.insert(req, &fresh.text)?;
                Ok(Completion { text: fresh.text, cached: false })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

/// Hosted completion endpoint speaking the common `/completions` and
/// `/chat/completions` JSON conventions with bearer auth.
pub struct HttpBackend {
    name: String,
    base_url: String,
    api_key: Option<String>,
    /// Optional template with `{prefix}` and `{suffix}` placeholders used to
    /// render fill-in-the-middle requests into a single prompt.
    fim_template: Option<String>,
    retries: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(name: impl Into<String>, base_url: impl Into<String>, api_key: Option<String>) -> Self {
        HttpBackend {
            name: name.into(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            fim_template: None,
            retries: 3,
            backoff: Duration::from_millis(500),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client builds"),
        }
    }

    /// Reads `MODEL_API_BASE` and `MODEL_API_KEY`.
    pub fn from_env(name: impl Into<String>) -> Result<Self, GatewayError> {
        let name = name.into();
        let base = std::env::var(ENV_API_BASE).map_err(|_| GatewayError::BackendUnavailable {
            backend: name.clone(),
            message: format!("{ENV_API_BASE} is not set"),
        })?;
        Ok(Self::new(name, base, std::env::var(ENV_API_KEY).ok()))
    }

    pub fn with_fim_template(mut self, template: impl Into<String>) -> Self {
        self.fim_template = Some(template.into());
        self
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    /// Endpoint path and JSON body for a request.
    pub fn wire_body(&self, req: &GenRequest) -> (&'static str, serde_json::Value) {
        let p = &req.params;
        let mut body = serde_json::json!({
            "model": req.model_name,
            "temperature": p.temperature,
            "top_p": p.top_p,
            "max_tokens": p.max_new_tokens,
        });
        let obj = body.as_object_mut().expect("object literal");
        match req.mode {
            GenMode::Chat => {
                obj.insert("messages".into(), serde_json::to_value(&req.prompt.messages).expect("messages"));
                ("/chat/completions", body)
            }
            GenMode::LeftToRight => {
                obj.insert("prompt".into(), req.prompt.prefix.clone().into());
                ("/completions", body)
            }
            GenMode::FillInMiddle => {
                let suffix = req.prompt.suffix.clone().unwrap_or_default();
                match &self.fim_template {
                    Some(t) => {
                        let prompt = t.replace("{prefix}", &req.prompt.prefix).replace("{suffix}", &suffix);
                        obj.insert("prompt".into(), prompt.into());
                    }
                    None => {
                        obj.insert("prompt".into(), req.prompt.prefix.clone().into());
                        obj.insert("suffix".into(), suffix.into());
                    }
                }
                ("/completions", body)
            }
        }
    }

    fn unavailable(&self, message: impl Into<String>) -> GatewayError {
        GatewayError::BackendUnavailable { backend: self.name.clone(), message: message.into() }
    }
}

fn response_text(mode: GenMode, v: &serde_json::Value) -> Option<String> {
    let choice = v.get("choices")?.get(0)?;
    let text = match mode {
        GenMode::Chat => choice.get("message")?.get("content")?,
        _ => choice.get("text")?,
    };
    text.as_str().map(str::to_string)
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &GenRequest) -> Result<Completion, GatewayError> {
        let (path, body) = self.wire_body(req);
        let url = format!("{}{}", self.base_url, path);
        let mut attempt = 0;
        loop {
            let mut rb = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                rb = rb.bearer_auth(key);
            }
            match rb.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if !status.is_success() {
                        let text = resp.text().unwrap_or_default();
                        return Err(self.unavailable(format!("HTTP {status}: {text}")));
                    }
                    let v: serde_json::Value = resp.json().map_err(|e| self.unavailable(e.to_string()))?;
                    let text = response_text(req.mode, &v)
                        .ok_or_else(|| self.unavailable(format!("unexpected response shape: {v}")))?;
                    return Ok(Completion { text, cached: false });
                }
                // Only transport failures are retried.
                Err(e) if attempt < self.retries && (e.is_connect() || e.is_timeout() || e.is_request()) => {
                    let wait = self.backoff * 2u32.pow(attempt);
                    log::warn!("{}: transport error ({e}), retrying in {wait:?}", self.name);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(self.unavailable(e.to_string())),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RateLimit {
    pub max_requests: u32,
    pub window: Duration,
}

impl RateLimit {
    pub fn per_minute(n: u32) -> Self {
        RateLimit { max_requests: n, window: Duration::from_secs(60) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GatewayLimits {
    pub max_in_flight: usize,
    pub rate: Option<RateLimit>,
    /// Total number of requests this gateway will issue.
    pub budget: Option<u64>,
}

impl Default for GatewayLimits {
    fn default() -> Self {
        GatewayLimits { max_in_flight: 8, rate: None, budget: None }
    }
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    limits: GatewayLimits,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
    issued: AtomicU64,
    recent: Mutex<VecDeque<Instant>>,
}

struct Slot<'a>(&'a Gateway);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("in-flight lock");
        *n -= 1;
        self.0.slot_free.notify_one();
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, limits: GatewayLimits) -> Self {
        Gateway {
            backend,
            limits: GatewayLimits { max_in_flight: limits.max_in_flight.max(1), ..limits },
            in_flight: Mutex::new(0),
            slot_free: Condvar::new(),
            issued: AtomicU64::new(0),
            recent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn requests_issued(&self) -> u64 {
        self.issued.load(Ordering::SeqCst)
    }

    fn acquire(&self) -> Slot<'_> {
        let mut n = self.in_flight.lock().expect("in-flight lock");
        while *n >= self.limits.max_in_flight {
            n = self.slot_free.wait(n).expect("in-flight lock");
        }
        *n += 1;
        Slot(self)
    }

    fn throttle(&self) {
        let Some(rate) = self.limits.rate else { return };
        loop {
            let mut recent = self.recent.lock().expect("rate lock");
            let now = Instant::now();
            while recent.front().is_some_and(|t| now.duration_since(*t) >= rate.window) {
                recent.pop_front();
            }
            if recent.len() < rate.max_requests as usize {
                recent.push_back(now);
                return;
            }
            let wait = rate.window - now.duration_since(*recent.front().expect("non-empty window"));
            drop(recent);
            std::thread::sleep(wait);
        }
    }

    pub fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError> {
        req.validate()?;
        let n = self.issued.fetch_add(1, Ordering::SeqCst) + 1;
        if let Some(budget) = self.limits.budget {
            if n > budget {
                return Err(GatewayError::BudgetExceeded { budget });
            }
        }
        let _slot = self.acquire();
        self.throttle();
        let started = Instant::now();
        let out = self.backend.complete(req)?;
        Ok(GenResponse {
            text: out.text,
            backend: self.backend.name().to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
            cached: out.cached,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::AtomicUsize;

    fn req(prefix: &str) -> GenRequest {
        GenRequest::left_to_right("m", prefix, GenParams::starcoder())
    }

    #[test]
    fn presets() {
        assert_eq!(GenParams::starcoder(), GenParams { temperature: 0.2, top_p: 0.95, max_new_tokens: 150 });
        assert_eq!(GenParams::qwen().temperature, 0.3);
        assert_eq!(GenParams::repair(), GenParams { temperature: 0.0, top_p: 0.95, max_new_tokens: 2048 });
        assert_eq!(GenParams::completion_preset("Qwen2.5-Coder-7B"), GenParams::qwen());
    }

    #[test]
    fn validation() {
        let mut r = req("x");
        r.mode = GenMode::FillInMiddle;
        assert!(matches!(r.validate(), Err(GatewayError::InvalidRequest(_))));
        let r = GenRequest::chat("m", vec![], GenParams::repair());
        assert!(r.validate().is_err());
        let mut r = req("x");
        r.params.top_p = 0.0;
        assert!(r.validate().is_err());
        r.params = GenParams { temperature: -1.0, ..GenParams::starcoder() };
        assert!(r.validate().is_err());
    }

    #[test]
    fn digest_is_pure_and_sensitive() {
        assert_eq!(req("a").digest(), req("a").digest());
        assert_ne!(req("a").digest(), req("b").digest());
        let mut r = req("a");
        r.model_name = "other".into();
        assert_ne!(r.digest(), req("a").digest());
    }

    #[test]
    fn replay_hit_and_strict_miss() {
        let store = Arc::new(ReplayStore::in_memory());
        store.insert(&req("known"), "answer").unwrap();
        let gw = Gateway::new(Arc::new(ReplayBackend::strict("b", store)), GatewayLimits::default());
        let hit = gw.generate(&req("known")).unwrap();
        assert_eq!(hit.text, "answer");
        assert!(hit.cached);
        assert!(matches!(gw.generate(&req("unknown")), Err(GatewayError::ReplayMiss { .. })));
    }

    #[test]
    fn record_then_replay_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = ReplayStore::path_for(dir.path(), "scripted");
        {
            let store = Arc::new(ReplayStore::open(&path).unwrap());
            let inner = ScriptedBackend::new("scripted", |r: &GenRequest| r.prompt.prefix.to_uppercase());
            let gw = Gateway::new(
                Arc::new(ReplayBackend::recording("scripted", store.clone(), Box::new(inner))),
                GatewayLimits::default(),
            );
            let first = gw.generate(&req("abc")).unwrap();
            assert_eq!((first.text.as_str(), first.cached), ("ABC", false));
            assert!(gw.generate(&req("abc")).unwrap().cached);
            gw.generate(&req("xyz")).unwrap();
            store.compact().unwrap();
        }
        let store = Arc::new(ReplayStore::open(&path).unwrap());
        assert_eq!(store.len(), 2);
        let gw = Gateway::new(Arc::new(ReplayBackend::strict("scripted", store)), GatewayLimits::default());
        assert_eq!(gw.generate(&req("xyz")).unwrap().text, "XYZ");
        let text = fs::read_to_string(&path).unwrap();
        let digests: Vec<String> =
            text.lines().map(|l| serde_json::from_str::<ReplayEntry>(l).unwrap().digest).collect();
        let mut sorted = digests.clone();
        sorted.sort();
        assert_eq!(digests, sorted);
    }

    #[test]
    fn in_flight_ceiling_holds() {
        let current = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let (c, p) = (current.clone(), peak.clone());
        let backend = ScriptedBackend::new("slow", move |_r: &GenRequest| {
            let now = c.fetch_add(1, Ordering::SeqCst) + 1;
            p.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(2));
            c.fetch_sub(1, Ordering::SeqCst);
            "ok".to_string()
        });
        let gw = Arc::new(Gateway::new(Arc::new(backend), GatewayLimits { max_in_flight: 4, ..Default::default() }));
        let handles: Vec<_> = (0..10)
            .map(|t| {
                let gw = gw.clone();
                std::thread::spawn(move || {
                    for i in 0..10 {
                        gw.generate(&req(&format!("{t}-{i}"))).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(gw.requests_issued(), 100);
        assert!(peak.load(Ordering::SeqCst) <= 4, "peak {}", peak.load(Ordering::SeqCst));
        assert!(peak.load(Ordering::SeqCst) >= 2);
    }

    #[test]
    fn budget_exceeded() {
        let gw = Gateway::new(
            Arc::new(ScriptedBackend::new("s", |_r: &GenRequest| String::new())),
            GatewayLimits { budget: Some(2), ..Default::default() },
        );
        gw.generate(&req("1")).unwrap();
        gw.generate(&req("2")).unwrap();
        assert!(matches!(gw.generate(&req("3")), Err(GatewayError::BudgetExceeded { budget: 2 })));
    }

    #[test]
    fn rate_limit_spreads_requests() {
        let gw = Gateway::new(
            Arc::new(ScriptedBackend::new("s", |_r: &GenRequest| String::new())),
            GatewayLimits {
                rate: Some(RateLimit { max_requests: 3, window: Duration::from_millis(150) }),
                ..Default::default()
            },
        );
        let t = Instant::now();
        for i in 0..6 {
            gw.generate(&req(&i.to_string())).unwrap();
        }
        assert!(t.elapsed() >= Duration::from_millis(150));
    }

    #[test]
    fn wire_body_shapes() {
        let http = HttpBackend::new("h", "http://x/v1/", None);
        let (path, body) = http.wire_body(&GenRequest::fill_in_middle("sc", "a.", "(b)", GenParams::starcoder()));
        assert_eq!(path, "/completions");
        assert_eq!(body["prompt"], "a.");
        assert_eq!(body["suffix"], "(b)");
        assert_eq!(body["max_tokens"], 150);
        assert_eq!(body["top_p"], 0.95);
        let http = http.with_fim_template("<fim_prefix>{prefix}<fim_suffix>{suffix}<fim_middle>");
        let (_, body) = http.wire_body(&GenRequest::fill_in_middle("sc", "a.", "(b)", GenParams::starcoder()));
        assert_eq!(body["prompt"], "<fim_prefix>a.<fim_suffix>(b)<fim_middle>");
        assert!(body.get("suffix").is_none());
        let (path, body) = http.wire_body(&GenRequest::chat("g", vec![ChatMessage::user("hi")], GenParams::repair()));
        assert_eq!(path, "/chat/completions");
        assert_eq!(body["messages"][0]["content"], "hi");
        assert_eq!(body["temperature"], 0.0);
    }

    /// One-shot HTTP server answering a single request with `body`.
    fn serve_once(body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut sock, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                let n = sock.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf).to_string();
                if let Some(idx) = text.find("\r\n\r\n") {
                    let len = text[..idx]
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap())
                        })
                        .unwrap_or(0);
                    if buf.len() >= idx + 4 + len {
                        break;
                    }
                }
            }
            let resp = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{}",
                body.len(),
                body
            );
            sock.write_all(resp.as_bytes()).unwrap();
            String::from_utf8(buf).unwrap()
        });
        (format!("http://{addr}/v1"), handle)
    }

    #[test]
    fn http_round_trip_with_bearer_auth() {
        let (base, server) = serve_once(r#"{"choices":[{"text":"get"}]}"#);
        let http = HttpBackend::new("live", base, Some("sekrit".into()));
        let gw = Gateway::new(Arc::new(http), GatewayLimits::default());
        let resp = gw
            .generate(&GenRequest::fill_in_middle("starcoder", "requests.", "(url)", GenParams::starcoder()))
            .unwrap();
        assert_eq!(resp.text, "get");
        assert!(!resp.cached);
        let raw = server.join().unwrap();
        assert!(raw.starts_with("POST /v1/completions"));
        assert!(raw.to_ascii_lowercase().contains("authorization: bearer sekrit"));
        assert!(raw.contains("\"suffix\":\"(url)\""));
    }

    #[test]
    fn http_unreachable_is_unavailable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let http = HttpBackend::new("dead", format!("http://{addr}"), None).with_retries(1, Duration::from_millis(1));
        let err = http.complete(&req("x")).unwrap_err();
        assert!(matches!(err, GatewayError::BackendUnavailable { .. }));
    }
}
