//! Provider-agnostic chat-completion access.
//!
//! A [`Gateway`] wraps a backend (an OpenAI-compatible HTTP endpoint or a
//! scripted mock), a content-addressed on-disk response cache, bounded
//! retries with exponential backoff, and a concurrency limiter. Everything
//! downstream treats it as an opaque thread-safe service, which is what makes
//! interrupted generation runs resumable and offline tests deterministic.

mod cache;
mod http;
mod mock;

pub use cache::ResponseCache;
pub use http::HttpBackend;
pub use mock::{MockBackend, MockCall, MockRule};

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::util::sha256_hex;

/// Chat message author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: 0.7,
            max_tokens: 1024,
            seed: None,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest(
                "messages must be non-empty".into(),
            ));
        }
        if self.messages[0].role == Role::Assistant {
            return Err(GatewayError::InvalidRequest(
                "first message must be system or user".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Content address of this request: sha256 over every field that affects
    /// the completion. Equal requests collide; any field change separates.
    pub fn cache_key(&self) -> CacheKey {
        let mut parts: Vec<Vec<u8>> = Vec::new();
        parts.push(self.model.as_bytes().to_vec());
        for m in &self.messages {
            parts.push(
                match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                }
                .as_bytes()
                .to_vec(),
            );
            parts.push(m.content.as_bytes().to_vec());
        }
        parts.push(self.temperature.to_le_bytes().to_vec());
        parts.push(self.max_tokens.to_le_bytes().to_vec());
        parts.push(match self.seed {
            Some(s) => s.to_le_bytes().to_vec(),
            None => b"noseed".to_vec(),
        });
        // Length-prefix every part so field boundaries cannot alias.
        let framed: Vec<Vec<u8>> = parts
            .into_iter()
            .flat_map(|p| vec![(p.len() as u64).to_le_bytes().to_vec(), p])
            .collect();
        let refs: Vec<&[u8]> = framed.iter().map(|p| p.as_slice()).collect();
        CacheKey(sha256_hex(&refs))
    }

    /// All message contents joined, for substring matching and prompt tests.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Hex sha256 digest identifying a request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey(pub String);

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
    pub cached: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("endpoint returned {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("mock script has no rule matching request {digest}")]
    MockScriptExhausted { digest: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    fn retryable(&self) -> bool {
        matches!(
            self,
            GatewayError::Timeout { .. }
                | GatewayError::RateLimited { .. }
                | GatewayError::Transport(_)
                | GatewayError::Endpoint {
                    status: 500..=599,
                    ..
                }
        )
    }
}

/// One completion backend: HTTP endpoint or scripted mock.
pub trait Backend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;
    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base: Duration::from_millis(250),
        }
    }
}

/// Counting semaphore: at most `limit` requests in flight.
struct Limiter {
    limit: usize,
    state: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(limit: usize) -> Self {
        Limiter {
            limit,
            state: Mutex::new(0),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut in_flight = self.state.lock().unwrap();
        while *in_flight >= self.limit {
            in_flight = self.cv.wait(in_flight).unwrap();
        }
        *in_flight += 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.limiter.state.lock().unwrap();
        *in_flight -= 1;
        self.limiter.cv.notify_one();
    }
}

/// Running totals across all calls through a gateway.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub calls: u64,
    pub cache_hits: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    limiter: Limiter,
    stats: Mutex<GatewayStats>,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Gateway {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: Limiter::new(4),
            stats: Mutex::new(GatewayStats::default()),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Cap in-flight requests at `n` (n >= 1). Queued callers block; turns of
    /// one conversation stay ordered because each is submitted only after the
    /// previous returned.
    pub fn with_concurrency_limit(mut self, n: usize) -> Self {
        assert!(n >= 1, "concurrency limit must be at least 1");
        self.limiter = Limiter::new(n);
        self
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn stats(&self) -> GatewayStats {
        *self.stats.lock().unwrap()
    }

    /// Complete a chat request: cache lookup, then backend with bounded
    /// retries. Cache hits return the stored content with `cached = true` and
    /// never touch the backend.
    pub fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let key = req.cache_key();
        if let Some(cache) = &self.cache
            && let Some(mut resp) = cache.get(&key)
        {
            resp.cached = true;
            let mut stats = self.stats.lock().unwrap();
            stats.calls += 1;
            stats.cache_hits += 1;
            return Ok(resp);
        }

        let _permit = self.limiter.acquire();
        let mut last_err = None;
        for attempt in 0..self.retry.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.backoff_base * 2u32.pow(attempt - 1));
            }
            match self.backend.complete(req) {
                Ok(resp) => {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &resp)?;
                    }
                    let mut stats = self.stats.lock().unwrap();
                    stats.calls += 1;
                    stats.prompt_tokens += resp.usage.prompt_tokens;
                    stats.completion_tokens += resp.usage.completion_tokens;
                    return Ok(resp);
                }
                Err(e) if e.retryable() && attempt + 1 < self.retry.max_attempts => {
                    log::debug!("attempt {} failed, retrying: {e}", attempt + 1);
                    last_err = Some(e);
                }
                Err(e) => {
                    // Attach the attempt count to budget-exhaustion errors.
                    let e = match e {
                        GatewayError::Timeout { .. } => GatewayError::Timeout {
                            attempts: attempt + 1,
                        },
                        GatewayError::RateLimited { .. } => GatewayError::RateLimited {
                            attempts: attempt + 1,
                        },
                        other => other,
                    };
                    return Err(e);
                }
            }
        }
        Err(last_err.expect("loop ran at least once"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_key_separates_every_field() {
        let base = ChatRequest::new("m", vec![Message::user("hi")]);
        let key = base.cache_key();
        assert_eq!(key, base.clone().cache_key());

        let mut other = base.clone();
        other.model = "m2".into();
        assert_ne!(key, other.cache_key());

        let mut other = base.clone();
        other.temperature = 0.0;
        assert_ne!(key, other.cache_key());

        let mut other = base.clone();
        other.max_tokens = 2048;
        assert_ne!(key, other.cache_key());

        let mut other = base.clone();
        other.seed = Some(1);
        assert_ne!(key, other.cache_key());

        let mut other = base.clone();
        other.messages.push(Message::assistant("yo"));
        assert_ne!(key, other.cache_key());
    }

    #[test]
    fn validate_rejects_bad_requests() {
        let empty = ChatRequest::new("m", vec![]);
        assert!(empty.validate().is_err());

        let assistant_first = ChatRequest::new("m", vec![Message::assistant("x")]);
        assert!(assistant_first.validate().is_err());

        let hot = ChatRequest::new("m", vec![Message::user("x")]).with_temperature(2.5);
        assert!(hot.validate().is_err());
    }
}
