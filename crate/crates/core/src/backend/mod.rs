//! Model backends for the two roles in the pipeline: a vision-language
//! model that writes anchor and residual captions, and a text-only model
//! that validates evidence, synthesizes narratives and answers QA items.
//!
//! [`ModelClient`] wraps a [`Transport`] with rate limiting, retries and a
//! record/replay fixture store keyed by [`request_hash`]. In replay mode
//! the transport is never touched.

mod clock;
mod fixtures;
mod http;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use clock::{Clock, RateLimiter, SystemClock, VirtualClock};
pub use fixtures::{Fixture, FixtureRequest, FixtureStore};
pub use http::{chat_payload, parse_chat_response, HttpTransport};

use crate::frames::FrameBytes;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("replay fixture missing for request {hash}")]
    FixtureMissing { hash: String },
    #[error("fixture {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("credential environment variable `{var}` is not set")]
    Credential { var: String },
    #[error("backend config: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendError::FixtureMissing { .. } => "fixture_missing",
            BackendError::Fixture { .. } => "fixture",
            BackendError::Transport { .. } => "transport",
            BackendError::Credential { .. } => "credential",
            BackendError::Config(_) => "backend_config",
            BackendError::InvalidRequest(_) => "invalid_request",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    VisionCaption,
    TextReason,
}

impl ModelRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelRole::VisionCaption => "vision_caption",
            ModelRole::TextReason => "text_reason",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    pub time_s: f64,
    pub mime: String,
    pub bytes: Vec<u8>,
}

impl ImageInput {
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

impl From<FrameBytes> for ImageInput {
    fn from(f: FrameBytes) -> Self {
        ImageInput {
            time_s: f.time_s,
            mime: f.mime.to_string(),
            bytes: f.bytes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            max_tokens: 2048,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub role: ModelRole,
    pub prompt: String,
    pub images: Vec<ImageInput>,
    pub params: DecodeParams,
}

impl ModelRequest {
    pub fn vision(prompt: impl Into<String>, images: Vec<ImageInput>, params: DecodeParams) -> Self {
        ModelRequest {
            role: ModelRole::VisionCaption,
            prompt: prompt.into(),
            images,
            params,
        }
    }

    pub fn text(prompt: impl Into<String>, params: DecodeParams) -> Self {
        ModelRequest {
            role: ModelRole::TextReason,
            prompt: prompt.into(),
            images: Vec::new(),
            params,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.role {
            ModelRole::VisionCaption if self.images.is_empty() => Err(BackendError::InvalidRequest(
                "vision_caption requests need at least one image".into(),
            )),
            ModelRole::TextReason if !self.images.is_empty() => Err(BackendError::InvalidRequest(
                "text_reason requests carry no images".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
    pub backend_id: String,
    /// Set when the model declined to answer; text may then be empty.
    #[serde(default)]
    pub refusal: bool,
}

/// SHA-256 over role, prompt, decode parameters and the content digest of
/// every image in order. Fields are length-prefixed so adjacent fields
/// cannot alias.
pub fn request_hash(req: &ModelRequest) -> String {
    fn field(h: &mut Sha256, bytes: &[u8]) {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    let mut h = Sha256::new();
    field(&mut h, b"codeccap-request-v1");
    field(&mut h, req.role.as_str().as_bytes());
    field(&mut h, req.prompt.as_bytes());
    field(&mut h, &req.params.max_tokens.to_le_bytes());
    field(&mut h, &req.params.temperature.to_bits().to_le_bytes());
    field(&mut h, &(req.images.len() as u64).to_le_bytes());
    for img in &req.images {
        field(&mut h, img.digest().as_bytes());
    }
    hex::encode(h.finalize())
}

/// Anything that can answer a [`ModelRequest`].
pub trait Backend: Send + Sync {
    fn invoke(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError>;
    fn id(&self) -> &str;
}

/// Outcome of a single upstream attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

/// One upstream call, without retries or rate limiting.
pub trait Transport: Send + Sync {
    fn send(&self, req: &ModelRequest) -> Result<ModelResponse, TransportError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Live,
    Record,
    #[default]
    Replay,
}

impl std::str::FromStr for BackendMode {
    type Err = BackendError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(BackendMode::Live),
            "record" => Ok(BackendMode::Record),
            "replay" => Ok(BackendMode::Replay),
            other => Err(BackendError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Profile name; also names the credential variable.
    pub name: String,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Overrides the default `CODECCAP_<NAME>_KEY`.
    pub credential_env: Option<String>,
    pub rpm_limit: u32,
    pub max_retries: u32,
    pub backoff_base_s: f64,
    pub timeout_s: f64,
    pub mode: BackendMode,
    pub fixture_dir: Option<PathBuf>,
    /// Extra top-level fields merged into every request body.
    pub extra_body: Option<serde_json::Value>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            name: "offline".into(),
            endpoint: None,
            model: None,
            credential_env: None,
            rpm_limit: 60,
            max_retries: 3,
            backoff_base_s: 1.0,
            timeout_s: 120.0,
            mode: BackendMode::Replay,
            fixture_dir: None,
            extra_body: None,
        }
    }
}

impl BackendConfig {
    pub fn credential_var(&self) -> String {
        self.credential_env.clone().unwrap_or_else(|| {
            let name: String = self
                .name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
                .collect();
            format!("CODECCAP_{name}_KEY")
        })
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.rpm_limit == 0 {
            return Err(BackendError::Config("rpm_limit must be > 0".into()));
        }
        if !(self.backoff_base_s >= 0.0) {
            return Err(BackendError::Config("backoff_base_s must be >= 0".into()));
        }
        if self.mode != BackendMode::Live && self.fixture_dir.is_none() {
            return Err(BackendError::Config(format!(
                "{:?} mode needs a fixture directory (CODECCAP_REPLAY_DIR)",
                self.mode
            )));
        }
        Ok(())
    }
}

/// Rate-limited, retrying, record/replay model client.
pub struct ModelClient {
    cfg: BackendConfig,
    transport: Option<Arc<dyn Transport>>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    fixtures: Option<FixtureStore>,
    upstream_calls: AtomicU64,
}

impl std::fmt::Debug for ModelClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelClient")
            .field("cfg", &self.cfg)
            .field("upstream_calls", &self.upstream_calls())
            .finish()
    }
}

impl ModelClient {
    /// Builds a client with the HTTP transport. Live and record modes
    /// resolve the credential here, before any network activity.
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let transport: Option<Arc<dyn Transport>> = match cfg.mode {
            BackendMode::Replay => None,
            BackendMode::Live | BackendMode::Record => {
                let var = cfg.credential_var();
                let key = std::env::var(&var)
                    .ok()
                    .filter(|k| !k.is_empty())
                    .ok_or(BackendError::Credential { var })?;
                Some(Arc::new(HttpTransport::new(&cfg, key)?))
            }
        };
        Self::build(cfg, transport, Arc::new(SystemClock::new()))
    }

    /// Client over an arbitrary transport and clock.
    pub fn with_transport(
        cfg: BackendConfig,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, BackendError> {
        cfg.validate()?;
        Self::build(cfg, Some(transport), clock)
    }

    fn build(
        cfg: BackendConfig,
        transport: Option<Arc<dyn Transport>>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, BackendError> {
        let fixtures = cfg.fixture_dir.clone().map(FixtureStore::new);
        Ok(ModelClient {
            limiter: RateLimiter::per_minute(cfg.rpm_limit),
            cfg,
            transport,
            clock,
            fixtures,
            upstream_calls: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    /// Number of attempts handed to the transport so far.
    pub fn upstream_calls(&self) -> u64 {
        self.upstream_calls.load(Ordering::SeqCst)
    }

    fn call_upstream(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| BackendError::Config("no transport configured".into()))?;
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            self.upstream_calls.fetch_add(1, Ordering::SeqCst);
            attempt += 1;
            match transport.send(req) {
                Ok(resp) => return Ok(resp),
                Err(TransportError::Transient(msg)) if attempt <= self.cfg.max_retries => {
                    let backoff = self.cfg.backoff_base_s * 2f64.powi(attempt as i32 - 1);
                    log::warn!("transient backend failure (attempt {attempt}): {msg}; retrying in {backoff:.1}s");
                    self.clock.sleep(Duration::from_secs_f64(backoff));
                }
                Err(e) => {
                    return Err(BackendError::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    })
                }
            }
        }
    }
}

impl Backend for ModelClient {
    fn invoke(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError> {
        req.validate()?;
        let hash = request_hash(req);
        match self.cfg.mode {
            BackendMode::Live => self.call_upstream(req),
            BackendMode::Replay => {
                let store = self.fixtures.as_ref().expect("validated: replay has fixtures");
                store
                    .load(&hash)?
                    .map(|f| f.response)
                    .ok_or(BackendError::FixtureMissing { hash })
            }
            BackendMode::Record => {
                let store = self.fixtures.as_ref().expect("validated: record has fixtures");
                if let Some(f) = store.load(&hash)? {
                    return Ok(f.response);
                }
                let resp = self.call_upstream(req)?;
                store.save(&hash, req, &resp)?;
                Ok(resp)
            }
        }
    }

    fn id(&self) -> &str {
        &self.cfg.name
    }
}
