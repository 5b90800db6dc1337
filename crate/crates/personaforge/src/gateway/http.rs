//! OpenAI-compatible chat-completions backend.

use std::time::Duration;

use serde_json::{Value, json};

use super::{Backend, ChatRequest, ChatResponse, FinishReason, GatewayError, Usage};

/// Talks to any endpoint implementing the chat-completions JSON shape.
/// `base_url` is the API root (e.g. `https://api.openai.com/v1`); the backend
/// appends `/chat/completions`.
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(timeout.min(Duration::from_secs(10)))
            .timeout(timeout)
            .build();
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            agent,
        }
    }

    fn body_for(req: &ChatRequest) -> Value {
        let messages: Vec<Value> = req
            .messages
            .iter()
            .map(|m| json!({"role": m.role, "content": m.content}))
            .collect();
        let mut body = json!({
            "model": req.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn parse_response(value: &Value) -> Result<ChatResponse, GatewayError> {
        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| GatewayError::Transport("response has no choices".into()))?;
        let content = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
            Some("stop") | None => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some(_) => FinishReason::Error,
        };
        let usage = Usage {
            prompt_tokens: value
                .pointer("/usage/prompt_tokens")
                .and_then(Value::as_u64)
                .unwrap_or(0),
            completion_tokens: value
                .pointer("/usage/completion_tokens")
                .and_then(Value::as_u64)
                .unwrap_or(0),
        };
        Ok(ChatResponse {
            content,
            finish_reason,
            usage,
            cached: false,
        })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let url = format!("{}/chat/completions", self.base_url);
        let mut http_req = self
            .agent
            .post(&url)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            http_req = http_req.set("Authorization", &format!("Bearer {key}"));
        }
        match http_req.send_json(Self::body_for(req)) {
            Ok(resp) => {
                let value: Value = resp
                    .into_json()
                    .map_err(|e| GatewayError::Transport(format!("invalid json body: {e}")))?;
                Self::parse_response(&value)
            }
            Err(ureq::Error::Status(429, _)) => Err(GatewayError::RateLimited { attempts: 1 }),
            Err(ureq::Error::Status(status, resp)) => Err(GatewayError::Endpoint {
                status,
                body: resp
                    .into_string()
                    .unwrap_or_default()
                    .chars()
                    .take(500)
                    .collect(),
            }),
            Err(ureq::Error::Transport(t)) => {
                if matches!(t.kind(), ureq::ErrorKind::Io) {
                    // ureq surfaces socket timeouts as io transport errors.
                    Err(GatewayError::Timeout { attempts: 1 })
                } else {
                    Err(GatewayError::Transport(t.to_string()))
                }
            }
        }
    }

    fn name(&self) -> &'static str {
        "openai-compatible"
    }
}
