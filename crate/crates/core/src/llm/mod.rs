//! Provider-agnostic chat completion with retries, per-provider concurrency
//! and rate limits, an on-disk response cache and deterministic mocks.
//!
//! Requests use the OpenAI-compatible chat-completions shape with a single
//! user message. Provider-side errors never surface as `Err`: after the
//! retry budget is spent they are returned inside
//! [`CompletionOutcome::failure`].

mod cache;
mod http;
mod mock;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, Semaphore};
use tokio::time::Instant;
use url::Url;

pub use cache::{CacheEntry, ResponseCache};
pub use http::HttpTransport;
pub use mock::{FlakyTransport, MockRule, MockTransport};

use crate::prompt::RenderedPrompt;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("provider {provider}: environment variable {env} is not set")]
    MissingCredentials { provider: String, env: String },
    #[error("provider {provider}: {message}")]
    InvalidSpec { provider: String, message: String },
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("invalid decoding config: {0}")]
    InvalidDecoding(String),
    #[error("cache: {0}")]
    Cache(String),
}

/// Sampling parameters sent with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
    pub presence_penalty: f64,
    pub frequency_penalty: f64,
}

impl DecodingConfig {
    /// Greedy decoding with a 100-token budget, used for classification.
    pub const fn classification() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 100,
            top_p: 1.0,
            presence_penalty: 0.0,
            frequency_penalty: 0.0,
        }
    }

    /// Classification settings with room for a full set of definitions.
    pub const fn knowledge_extraction() -> Self {
        Self {
            max_tokens: 1024,
            ..Self::classification()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: &str| Err(LlmError::InvalidDecoding(m.to_owned()));
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be a finite value >= 0");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        if !self.presence_penalty.is_finite() || !self.frequency_penalty.is_finite() {
            return bad("penalties must be finite");
        }
        Ok(())
    }
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self::classification()
    }
}

fn default_concurrency() -> u32 {
    4
}

/// One chat-completion endpoint serving a named model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    pub name: String,
    pub base_url: Url,
    pub model_id: String,
    /// Environment variable holding the API key. `None` for endpoints that
    /// need no key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: u32,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
    /// Dated model snapshot, recorded in run manifests.
    #[serde(default)]
    pub snapshot: Option<String>,
}

impl ProviderSpec {
    pub fn new(name: impl Into<String>, base_url: Url, model_id: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            base_url,
            model_id: model_id.into(),
            api_key_env: None,
            max_concurrency: default_concurrency(),
            requests_per_minute: None,
            snapshot: None,
        }
    }

    /// A spec for in-process mock providers.
    pub fn mock(name: impl Into<String>) -> Self {
        let name = name.into();
        let model_id = format!("mock-{name}");
        Self::new(name, Url::parse("mock://local/").expect("static url"), model_id)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let invalid = |message: &str| LlmError::InvalidSpec {
            provider: self.name.clone(),
            message: message.to_owned(),
        };
        if self.name.trim().is_empty() {
            return Err(invalid("name is empty"));
        }
        if self.model_id.trim().is_empty() {
            return Err(invalid("model_id is empty"));
        }
        if self.max_concurrency == 0 {
            return Err(invalid("max_concurrency must be at least 1"));
        }
        if self.requests_per_minute == Some(0) {
            return Err(invalid("requests_per_minute must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body in the OpenAI chat-completions shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
    pub presence_penalty: f64,
    pub frequency_penalty: f64,
}

impl ChatRequest {
    pub fn new(model_id: &str, prompt: &str, cfg: &DecodingConfig) -> Self {
        Self {
            model: model_id.to_owned(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_owned(),
            }],
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            top_p: cfg.top_p,
            presence_penalty: cfg.presence_penalty,
            frequency_penalty: cfg.frequency_penalty,
        }
    }

    /// The user message text.
    pub fn prompt(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }
}

/// A failed attempt as seen by the transport.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{message}", status.map(|s| format!("HTTP {s}: ")).unwrap_or_default())]
pub struct TransportError {
    pub status: Option<u16>,
    pub message: String,
    pub retryable: bool,
    /// Server-requested wait before the next attempt.
    pub retry_after: Option<Duration>,
}

impl TransportError {
    pub fn retryable(status: Option<u16>, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            retryable: true,
            retry_after: None,
        }
    }

    pub fn fatal(status: Option<u16>, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            retryable: false,
            retry_after: None,
        }
    }

    /// Retry on rate limiting, timeouts and server errors.
    pub fn from_status(status: u16, message: impl Into<String>) -> Self {
        let retryable = status == 408 || status == 409 || status == 429 || status >= 500;
        Self {
            status: Some(status),
            message: message.into(),
            retryable,
            retry_after: None,
        }
    }
}

/// Sends one chat request and returns the completion text.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Why a completion has no text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureInfo {
    pub status: Option<u16>,
    pub message: String,
    pub attempts: u32,
}

impl fmt::Display for FailureInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            Some(s) => write!(f, "HTTP {s} after {} attempt(s): {}", self.attempts, self.message),
            None => write!(f, "failed after {} attempt(s): {}", self.attempts, self.message),
        }
    }
}

/// Result of one completion call. Exactly one of `raw_text` and `failure`
/// is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOutcome {
    pub raw_text: Option<String>,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub from_cache: bool,
    pub failure: Option<FailureInfo>,
}

/// A spec bound to a transport, with its concurrency and rate limits.
#[derive(Clone)]
pub struct Provider {
    spec: ProviderSpec,
    transport: Arc<dyn Transport>,
    permits: Arc<Semaphore>,
    pacer: Option<Arc<Mutex<Instant>>>,
}

impl fmt::Debug for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Provider").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Provider {
    pub fn new(spec: ProviderSpec, transport: Arc<dyn Transport>) -> Result<Self, LlmError> {
        spec.validate()?;
        let permits = Arc::new(Semaphore::new(spec.max_concurrency as usize));
        let pacer = spec
            .requests_per_minute
            .map(|_| Arc::new(Mutex::new(Instant::now())));
        Ok(Self {
            spec,
            transport,
            permits,
            pacer,
        })
    }

    /// An HTTP provider. Reads the API key from the environment variable
    /// named in the spec.
    pub fn http(spec: ProviderSpec) -> Result<Self, LlmError> {
        let key = match &spec.api_key_env {
            Some(env) => Some(std::env::var(env).map_err(|_| LlmError::MissingCredentials {
                provider: spec.name.clone(),
                env: env.clone(),
            })?),
            None => None,
        };
        let transport = HttpTransport::new(&spec.base_url, key)?;
        Self::new(spec, Arc::new(transport))
    }

    pub fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    async fn pace(&self) {
        let (Some(pacer), Some(rpm)) = (&self.pacer, self.spec.requests_per_minute) else {
            return;
        };
        let interval = Duration::from_secs(60) / rpm;
        let wait_until = {
            let mut next = pacer.lock().await;
            let slot = (*next).max(Instant::now());
            *next = slot + interval;
            slot
        };
        tokio::time::sleep_until(wait_until).await;
    }

    async fn send_once(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        self.pace().await;
        self.transport.send(request).await
    }
}

/// Exponential backoff with multiplicative jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub max_delay: Duration,
    /// Each delay is multiplied by a uniform draw from `[1, 1 + jitter)`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
            max_delay: Duration::from_secs(30),
            jitter: 0.25,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            jitter: 0.0,
            ..Self::default()
        }
    }

    /// Delay before attempt `attempt + 1`, without jitter. `attempt` counts
    /// from 1.
    pub fn base_delay_after(&self, attempt: u32) -> Duration {
        let scaled = self.base_delay.as_secs_f64() * self.factor.powi(attempt.saturating_sub(1) as i32);
        Duration::from_secs_f64(scaled.min(self.max_delay.as_secs_f64()))
    }

    fn delay_after(&self, attempt: u32) -> Duration {
        let base = self.base_delay_after(attempt);
        if self.jitter <= 0.0 || base.is_zero() {
            return base;
        }
        base.mul_f64(rand::rng().random_range(1.0..1.0 + self.jitter))
    }
}

/// Issues completions against providers, retrying transient failures.
#[derive(Debug, Clone, Default)]
pub struct LlmClient {
    retry: RetryPolicy,
}

impl LlmClient {
    pub fn new(retry: RetryPolicy) -> Self {
        Self { retry }
    }

    pub fn retry_policy(&self) -> &RetryPolicy {
        &self.retry
    }

    pub async fn complete(
        &self,
        provider: &Provider,
        prompt: &RenderedPrompt,
        cfg: &DecodingConfig,
    ) -> Result<CompletionOutcome, LlmError> {
        self.complete_text(provider, &prompt.text, cfg).await
    }

    /// Like [`LlmClient::complete`] for a plain prompt string.
    pub async fn complete_text(
        &self,
        provider: &Provider,
        prompt: &str,
        cfg: &DecodingConfig,
    ) -> Result<CompletionOutcome, LlmError> {
        if prompt.is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        cfg.validate()?;
        let request = ChatRequest::new(&provider.spec.model_id, prompt, cfg);
        let started = Instant::now();
        let max_attempts = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match provider.send_once(&request).await {
                Ok(text) => {
                    return Ok(CompletionOutcome {
                        raw_text: Some(text),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt_count: attempt,
                        from_cache: false,
                        failure: None,
                    })
                }
                Err(err) if err.retryable && attempt < max_attempts => {
                    let wait = err.retry_after.unwrap_or_default().max(self.retry.delay_after(attempt));
                    log::debug!("{}: attempt {attempt} failed ({err}); retrying in {wait:?}", provider.spec.name);
                    tokio::time::sleep(wait).await;
                }
                Err(err) => {
                    log::warn!("{}: giving up after {attempt} attempt(s): {err}", provider.spec.name);
                    return Ok(CompletionOutcome {
                        raw_text: None,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt_count: attempt,
                        from_cache: false,
                        failure: Some(FailureInfo {
                            status: err.status,
                            message: err.message,
                            attempts: attempt,
                        }),
                    });
                }
            }
        }
    }

    /// Serves from `cache` when possible; successful completions are
    /// stored. Failures are never cached so a later run retries them.
    pub async fn cached_complete(
        &self,
        provider: &Provider,
        prompt: &RenderedPrompt,
        cfg: &DecodingConfig,
        cache: &ResponseCache,
    ) -> Result<CompletionOutcome, LlmError> {
        let key = ResponseCache::key(&provider.spec.model_id, &prompt.text, cfg);
        if let Some(entry) = cache.get(&key) {
            return Ok(CompletionOutcome {
                raw_text: Some(entry.response.raw_text),
                latency_ms: 0,
                attempt_count: 0,
                from_cache: true,
                failure: None,
            });
        }
        let outcome = self.complete(provider, prompt, cfg).await?;
        if let Some(text) = &outcome.raw_text {
            cache
                .put(&key, &provider.spec.model_id, &prompt.text, cfg, text, &outcome)
                .await
                .map_err(|e| LlmError::Cache(e.to_string()))?;
        }
        Ok(outcome)
    }
}
