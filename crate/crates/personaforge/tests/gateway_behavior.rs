//! Gateway contract tests: concurrency cap, cache resumability, retry
//! budget, and mock determinism.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use personaforge::gateway::{
    Backend, ChatRequest, ChatResponse, FinishReason, Gateway, GatewayError, Message, MockBackend,
    MockRule, ResponseCache, RetryPolicy, Usage,
};

fn req(text: &str) -> ChatRequest {
    ChatRequest::new("test-model", vec![Message::user(text.to_string())])
}

#[test]
fn concurrency_limit_caps_overlap() {
    let mock =
        MockBackend::new(vec![MockRule::catch_all("ok")]).with_latency(Duration::from_millis(2));
    let gateway = Gateway::new(Box::new(mock.clone())).with_concurrency_limit(8);

    std::thread::scope(|scope| {
        for i in 0..100 {
            let gateway = &gateway;
            scope.spawn(move || {
                gateway.chat(&req(&format!("request {i}"))).unwrap();
            });
        }
    });

    assert_eq!(mock.call_count(), 100);
    assert!(
        mock.peak_in_flight() <= 8,
        "peak overlap {} exceeded the limit",
        mock.peak_in_flight()
    );
}

#[test]
fn limit_of_one_is_strictly_serial() {
    let mock =
        MockBackend::new(vec![MockRule::catch_all("ok")]).with_latency(Duration::from_millis(1));
    let gateway = Gateway::new(Box::new(mock.clone())).with_concurrency_limit(1);
    std::thread::scope(|scope| {
        for i in 0..16 {
            let gateway = &gateway;
            scope.spawn(move || {
                gateway.chat(&req(&format!("serial {i}"))).unwrap();
            });
        }
    });
    assert_eq!(mock.peak_in_flight(), 1);
}

#[test]
fn warm_cache_issues_no_backend_calls() {
    let dir = tempfile::tempdir().unwrap();
    let mock = MockBackend::new(vec![MockRule::catch_all("cached answer")]);
    let gateway = Gateway::new(Box::new(mock.clone()))
        .with_cache(ResponseCache::new(dir.path()))
        .with_concurrency_limit(4);

    let requests: Vec<ChatRequest> = (0..100).map(|i| req(&format!("question {i}"))).collect();
    for r in &requests {
        let resp = gateway.chat(r).unwrap();
        assert!(!resp.cached);
    }
    assert_eq!(mock.call_count(), 100);

    // Second pass: every response served from disk, zero new backend calls.
    for r in &requests {
        let resp = gateway.chat(r).unwrap();
        assert!(resp.cached);
        assert_eq!(resp.content, "cached answer");
    }
    assert_eq!(mock.call_count(), 100);
    assert_eq!(gateway.stats().cache_hits, 100);
}

#[test]
fn cache_hit_returns_the_originally_stored_content() {
    let dir = tempfile::tempdir().unwrap();
    let mock = MockBackend::new(vec![MockRule::catch_all("first words")]);
    let gateway = Gateway::new(Box::new(mock.clone())).with_cache(ResponseCache::new(dir.path()));
    let r = req("soundness");
    let first = gateway.chat(&r).unwrap();
    let second = gateway.chat(&r).unwrap();
    assert_eq!(first.content, second.content);
    assert!(second.cached);
}

#[test]
fn mock_responses_are_byte_identical_across_repetitions() {
    let mut r = req("determinism probe");
    r.temperature = 0.0;
    r.seed = Some(42);
    let mock = MockBackend::new(vec![MockRule::catch_all("the same words, every time")]);
    let gateway = Gateway::new(Box::new(mock));
    let first = gateway.chat(&r).unwrap();
    for _ in 0..9 {
        let next = gateway.chat(&r).unwrap();
        assert_eq!(next.content.as_bytes(), first.content.as_bytes());
    }
    // The digest pins the request identity across repetitions too.
    assert_eq!(r.cache_key(), r.clone().cache_key());
}

/// Fails `failures` times with a retryable error, then succeeds.
struct FlakyBackend {
    failures: u32,
    attempts: AtomicU32,
}

impl Backend for FlakyBackend {
    fn complete(&self, _req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let n = self.attempts.fetch_add(1, Ordering::SeqCst);
        if n < self.failures {
            return Err(GatewayError::RateLimited { attempts: 1 });
        }
        Ok(ChatResponse {
            content: "finally".into(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
            cached: false,
        })
    }
    fn name(&self) -> &'static str {
        "flaky"
    }
}

#[test]
fn retries_stay_within_budget_and_then_succeed() {
    let backend = Box::new(FlakyBackend {
        failures: 2,
        attempts: AtomicU32::new(0),
    });
    let gateway = Gateway::new(backend).with_retry(RetryPolicy {
        max_attempts: 3,
        backoff_base: Duration::from_millis(1),
    });
    let resp = gateway.chat(&req("please")).unwrap();
    assert_eq!(resp.content, "finally");
}

#[test]
fn retry_budget_exhaustion_surfaces_rate_limiting() {
    let backend = Box::new(FlakyBackend {
        failures: u32::MAX,
        attempts: AtomicU32::new(0),
    });
    let gateway = Gateway::new(backend).with_retry(RetryPolicy {
        max_attempts: 3,
        backoff_base: Duration::from_millis(1),
    });
    match gateway.chat(&req("never")) {
        Err(GatewayError::RateLimited { .. }) => {}
        other => panic!("expected RateLimited, got {other:?}"),
    }
}

/// Counts attempts to prove the budget bounds total tries.
#[test]
fn total_attempts_never_exceed_the_budget() {
    use std::sync::Arc;
    struct Counting(Arc<AtomicU32>);
    impl Backend for Counting {
        fn complete(&self, _req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Err(GatewayError::Timeout { attempts: 1 })
        }
        fn name(&self) -> &'static str {
            "counting"
        }
    }
    let attempts = Arc::new(AtomicU32::new(0));
    let gateway = Gateway::new(Box::new(Counting(attempts.clone()))).with_retry(RetryPolicy {
        max_attempts: 4,
        backoff_base: Duration::from_millis(1),
    });
    let _ = gateway.chat(&req("bound me"));
    assert_eq!(attempts.load(Ordering::SeqCst), 4);
}

#[test]
fn mock_script_exhaustion_is_not_retried() {
    let mock = MockBackend::new(vec![MockRule::substring("specific", "hit")]);
    let gateway = Gateway::new(Box::new(mock.clone())).with_retry(RetryPolicy {
        max_attempts: 5,
        backoff_base: Duration::from_millis(1),
    });
    match gateway.chat(&req("no rule for this")) {
        Err(GatewayError::MockScriptExhausted { .. }) => {}
        other => panic!("expected MockScriptExhausted, got {other:?}"),
    }
    assert_eq!(mock.call_count(), 1);
}

/// Serve canned HTTP responses on a loopback socket, one per accepted
/// connection, and exit.
fn serve_canned(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    use std::io::{Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut seen_bodies = Vec::new();
        for response in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 65536];
            let mut total = 0;
            // Read until the end of the request body (Content-Length based).
            loop {
                let n = stream.read(&mut buf[total..]).unwrap();
                total += n;
                let text = String::from_utf8_lossy(&buf[..total]);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(str::trim)
                                .map(str::to_string)
                        })
                        .and_then(|v| v.parse::<usize>().ok())
                        .unwrap_or(0);
                    if total >= header_end + 4 + content_length {
                        seen_bodies.push(text[header_end + 4..].to_string());
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            stream.write_all(response.as_bytes()).unwrap();
        }
        seen_bodies
    });
    (format!("http://{addr}"), handle)
}

fn http_ok(body: &str) -> String {
    format!(
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
}

#[test]
fn http_backend_speaks_the_chat_completions_wire_shape() {
    use personaforge::gateway::HttpBackend;

    let completion = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "In character, always."},
                     "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 21, "completion_tokens": 4}
    })
    .to_string();
    let (base_url, handle) = serve_canned(vec![http_ok(&completion)]);

    let backend = HttpBackend::new(base_url, Some("sk-test".into()), Duration::from_secs(5));
    let gateway = Gateway::new(Box::new(backend));
    let resp = gateway
        .chat(&req("Who are you?").with_temperature(0.0))
        .unwrap();
    assert_eq!(resp.content, "In character, always.");
    assert_eq!(resp.usage.prompt_tokens, 21);

    let bodies = handle.join().unwrap();
    let sent: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(sent["model"], "test-model");
    assert_eq!(sent["temperature"], 0.0);
    assert_eq!(sent["messages"][0]["content"], "Who are you?");
}

#[test]
fn http_429_maps_to_rate_limited_and_is_retried() {
    use personaforge::gateway::HttpBackend;

    let completion = serde_json::json!({
        "choices": [{"message": {"content": "made it"}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 1, "completion_tokens": 1}
    })
    .to_string();
    let too_many =
        "HTTP/1.1 429 Too Many Requests\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
            .to_string();
    let (base_url, handle) = serve_canned(vec![too_many, http_ok(&completion)]);

    let backend = HttpBackend::new(base_url, None, Duration::from_secs(5));
    let gateway = Gateway::new(Box::new(backend)).with_retry(RetryPolicy {
        max_attempts: 3,
        backoff_base: Duration::from_millis(1),
    });
    let resp = gateway.chat(&req("again please")).unwrap();
    assert_eq!(resp.content, "made it");
    assert_eq!(handle.join().unwrap().len(), 2, "server saw the retry");
}
