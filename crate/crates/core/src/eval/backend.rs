//! Chat-completion transports: HTTPS and a scripted offline mock.

use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{ClientConfig, EvalError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Chat-completions body with a single user message.
    pub fn body(&self) -> serde_json::Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": self.prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Timeouts, throttling and server errors; worth retrying.
    #[error("transient: {0}")]
    Transient(String),
    #[error("endpoint returned status {status}: {why}")]
    Fatal { status: u16, why: String },
}

/// Sends one request and returns the verbatim response body.
pub trait ChatBackend: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<String, BackendError>;
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: &ClientConfig) -> Result<Self, EvalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| EvalError::Config(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: std::env::var(&config.api_key_env).ok(),
        })
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let mut rb = self.client.post(&self.url).json(&req.body());
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb
            .send()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        if status.is_success() {
            Ok(body)
        } else if status.as_u16() == 429 || status.is_server_error() {
            Err(BackendError::Transient(format!("status {status}")))
        } else {
            Err(BackendError::Fatal {
                status: status.as_u16(),
                why: body.chars().take(200).collect(),
            })
        }
    }
}

/// Text and token counts pulled out of a chat-completions body.
pub fn extract_message(body: &str) -> Result<(String, Option<u64>, Option<u64>), String> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or("response has no choices[0].message.content")?
        .to_string();
    let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(|x| x.as_u64());
    Ok((text, usage("prompt_tokens"), usage("completion_tokens")))
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    /// Applies when the prompt contains this text.
    pub contains: String,
    #[serde(default)]
    pub response: Option<String>,
    /// Answer with 429 this many times before responding.
    #[serde(default)]
    pub throttle: u32,
    /// Fail every matching call with this status.
    #[serde(default)]
    pub fail_status: Option<u16>,
}

/// A scripted endpoint.
///
/// ```json
/// {"default_response": "<choice>(a)</choice>",
///  "pick": ["<choice>(a)</choice>", "<choice>(b)</choice>"],
///  "rules": [{"contains": "forty", "response": "...", "throttle": 2}],
///  "delay_ms": 5, "omit_usage": false}
/// ```
///
/// The first matching rule wins. Otherwise `pick` chooses by prompt digest,
/// falling back to `default_response`. Token counts are whitespace word
/// counts.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub default_response: Option<String>,
    #[serde(default)]
    pub pick: Vec<String>,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub delay_ms: u64,
    #[serde(default)]
    pub omit_usage: bool,
}

#[derive(Debug, Default)]
pub struct MockBackend {
    script: MockScript,
    throttled: Vec<AtomicU32>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        let throttled = script.rules.iter().map(|_| AtomicU32::new(0)).collect();
        Self {
            script,
            throttled,
            ..Default::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        let script = serde_json::from_str(&text)
            .map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(script))
    }

    /// Requests received, including throttled and failed ones.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of requests seen in flight at once.
    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    fn respond(&self, req: &ChatRequest) -> Result<String, BackendError> {
        for (i, rule) in self.script.rules.iter().enumerate() {
            if !req.prompt.contains(&rule.contains) {
                continue;
            }
            if let Some(status) = rule.fail_status {
                return Err(BackendError::Fatal {
                    status,
                    why: "scripted failure".into(),
                });
            }
            if self.throttled[i].fetch_add(1, Ordering::SeqCst) < rule.throttle {
                return Err(BackendError::Transient(
                    "status 429 Too Many Requests".into(),
                ));
            }
            if let Some(r) = &rule.response {
                return Ok(r.clone());
            }
            break;
        }
        if !self.script.pick.is_empty() {
            let d = Sha256::digest(req.prompt.as_bytes());
            let k =
                u64::from_le_bytes(d[..8].try_into().unwrap()) as usize % self.script.pick.len();
            return Ok(self.script.pick[k].clone());
        }
        self.script
            .default_response
            .clone()
            .ok_or_else(|| BackendError::Fatal {
                status: 404,
                why: "no scripted response".into(),
            })
    }
}

impl ChatBackend for MockBackend {
    fn send(&self, req: &ChatRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if self.script.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.script.delay_ms));
        }
        let out = self.respond(req);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let text = out?;
        let mut body = json!({
            "model": req.model,
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}],
        });
        if !self.script.omit_usage {
            body["usage"] = json!({
                "prompt_tokens": req.prompt.split_whitespace().count(),
                "completion_tokens": text.split_whitespace().count(),
            });
        }
        Ok(body.to_string())
    }
}
