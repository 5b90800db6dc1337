//! Scripted offline backend.
//!
//! A mock script is a JSON list of rules; the first rule whose digest or
//! message substring matches the request supplies the response. The backend
//! records a call log and the peak number of overlapping calls, which is what
//! the concurrency and resumability tests assert against.

use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::Value;

use super::{Backend, ChatRequest, ChatResponse, FinishReason, GatewayError, Usage};
use crate::jsonv::Cursor;

#[derive(Debug, Clone)]
pub struct MockRule {
    pub match_digest: Option<String>,
    pub match_substring: Option<String>,
    pub content: String,
    pub finish_reason: FinishReason,
}

impl MockRule {
    pub fn substring(needle: impl Into<String>, content: impl Into<String>) -> Self {
        MockRule {
            match_digest: None,
            match_substring: Some(needle.into()),
            content: content.into(),
            finish_reason: FinishReason::Stop,
        }
    }

    pub fn digest(digest: impl Into<String>, content: impl Into<String>) -> Self {
        MockRule {
            match_digest: Some(digest.into()),
            match_substring: None,
            content: content.into(),
            finish_reason: FinishReason::Stop,
        }
    }

    /// Matches everything; place last as a default response.
    pub fn catch_all(content: impl Into<String>) -> Self {
        Self::substring("", content)
    }

    fn matches(&self, digest: &str, prompt_text: &str) -> bool {
        if let Some(d) = &self.match_digest
            && d == digest
        {
            return true;
        }
        if let Some(s) = &self.match_substring
            && prompt_text.contains(s.as_str())
        {
            return true;
        }
        false
    }
}

/// One backend invocation, in arrival order.
#[derive(Debug, Clone)]
pub struct MockCall {
    pub seq: u64,
    pub digest: String,
    pub model: String,
    pub temperature: f64,
    pub last_message: String,
    pub prompt_text: String,
}

#[derive(Default)]
struct MockState {
    log: Mutex<Vec<MockCall>>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    seq: AtomicU64,
}

/// Clones share the rule list and call log.
#[derive(Clone)]
pub struct MockBackend {
    rules: Arc<Vec<MockRule>>,
    state: Arc<MockState>,
    latency: Duration,
}

impl MockBackend {
    pub fn new(rules: Vec<MockRule>) -> Self {
        MockBackend {
            rules: Arc::new(rules),
            state: Arc::new(MockState::default()),
            latency: Duration::ZERO,
        }
    }

    /// Load rules from a script file: a JSON list of
    /// `{"match": {"digest": ...} | {"message_substring": ...}, "response": ...}`
    /// where `response` is a string or `{"content", "finish_reason"}`.
    pub fn from_script(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::InvalidRequest(format!("mock script: {e}")))?;
        Ok(Self::new(
            parse_rules(&value).map_err(GatewayError::InvalidRequest)?,
        ))
    }

    /// Simulated per-call latency; lets concurrency tests observe overlap.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.state.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.log.lock().unwrap().len()
    }

    pub fn peak_in_flight(&self) -> usize {
        self.state.peak_in_flight.load(Ordering::SeqCst)
    }
}

fn parse_rules(value: &Value) -> Result<Vec<MockRule>, String> {
    let root = Cursor::root(value);
    let mut rules = Vec::new();
    for rule_cur in root.array().map_err(|e| e.to_string())? {
        let match_cur = rule_cur.field("match").map_err(|e| e.to_string())?;
        let match_digest = match match_cur.opt_field("digest") {
            Some(c) => Some(c.str().map_err(|e| e.to_string())?.to_string()),
            None => None,
        };
        let match_substring = match match_cur.opt_field("message_substring") {
            Some(c) => Some(c.str().map_err(|e| e.to_string())?.to_string()),
            None => None,
        };
        if match_digest.is_none() && match_substring.is_none() {
            return Err(format!(
                "at `{}`: rule needs a digest or message_substring matcher",
                match_cur.pointer()
            ));
        }
        let resp_cur = rule_cur.field("response").map_err(|e| e.to_string())?;
        let (content, finish_reason) = if let Ok(s) = resp_cur.str() {
            (s.to_string(), FinishReason::Stop)
        } else {
            let content = resp_cur
                .field("content")
                .and_then(|c| c.str().map(str::to_string))
                .map_err(|e| e.to_string())?;
            let finish = match resp_cur.opt_field("finish_reason") {
                Some(c) => match c.str().map_err(|e| e.to_string())? {
                    "stop" => FinishReason::Stop,
                    "length" => FinishReason::Length,
                    "error" => FinishReason::Error,
                    other => return Err(format!("unknown finish_reason `{other}`")),
                },
                None => FinishReason::Stop,
            };
            (content, finish)
        };
        rules.push(MockRule {
            match_digest,
            match_substring,
            content,
            finish_reason,
        });
    }
    Ok(rules)
}

impl Backend for MockBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let in_flight = self.state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.state
            .peak_in_flight
            .fetch_max(in_flight, Ordering::SeqCst);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }

        let digest = req.cache_key().0;
        let prompt_text = req.prompt_text();
        self.state.log.lock().unwrap().push(MockCall {
            seq: self.state.seq.fetch_add(1, Ordering::SeqCst),
            digest: digest.clone(),
            model: req.model.clone(),
            temperature: req.temperature,
            last_message: req
                .messages
                .last()
                .map(|m| m.content.clone())
                .unwrap_or_default(),
            prompt_text: prompt_text.clone(),
        });

        let result = self
            .rules
            .iter()
            .find(|r| r.matches(&digest, &prompt_text))
            .map(|r| ChatResponse {
                content: r.content.clone(),
                finish_reason: r.finish_reason,
                usage: Usage {
                    prompt_tokens: (prompt_text.len() / 4) as u64,
                    completion_tokens: (r.content.len() / 4) as u64,
                },
                cached: false,
            })
            .ok_or(GatewayError::MockScriptExhausted { digest });

        self.state.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}
