//! Backend over an HTTP messages endpoint.
//!
//! One request per attempt, no conversation state. The request body is
//!
//! ```json
//! {"model": "...", "max_tokens": 8192, "system": "...",
//!  "messages": [{"role": "user", "content": "<rendered template>"}]}
//! ```
//!
//! and the reply is expected to carry `content[].text` blocks and a `usage`
//! object (`input_tokens`, `output_tokens`, `cache_read_input_tokens`,
//! `cache_creation_input_tokens`). Only the text between [`PAYLOAD_BEGIN`] and
//! [`PAYLOAD_END`] is interpreted.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{
    AgentBackend, AgentError, AgentPayload, AgentTask, BackendReply, CheckVerdict, LeanDraft, PromptTemplates,
    TaskKind, TokenUsage,
};
use crate::plan::PlanDiff;

pub const PAYLOAD_BEGIN: &str = "<<<BEGIN PAYLOAD>>>";
pub const PAYLOAD_END: &str = "<<<END PAYLOAD>>>";
/// Environment variable holding the API key. There is deliberately no flag.
pub const API_KEY_ENV: &str = "PROOFLOOP_API_KEY";

const SYSTEM_PROMPT: &str = "You are one agent in a Lean 4 proving harness. Do exactly the one task \
you are given. Put your answer between <<<BEGIN PAYLOAD>>> and <<<END PAYLOAD>>>; anything outside \
the markers is ignored.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Send {
    fn post_json(
        &self,
        url: &str,
        headers: &[(&str, String)],
        body: &serde_json::Value,
    ) -> Result<HttpResponse, TransportError>;
}

/// Blocking transport on `ureq`.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(&str, String)],
        body: &serde_json::Value,
    ) -> Result<HttpResponse, TransportError> {
        let mut req = self.agent.post(url);
        for (k, v) in headers {
            req = req.header(*k, v.as_str());
        }
        let mut resp = req.send_json(body).map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(2),
        }
    }
}

impl RetryPolicy {
    /// Pause before attempt `n + 1` (after `n` failures): doubles each time.
    pub fn backoff(&self, failures: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(failures.saturating_sub(1))
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    pub max_tokens: u32,
    pub api_version: String,
    pub retry: RetryPolicy,
    pub templates: PromptTemplates,
    pub timeout: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.anthropic.com/v1/messages".into(),
            model: "claude-opus-4-1".into(),
            max_tokens: 8192,
            api_version: "2023-06-01".into(),
            retry: RetryPolicy::default(),
            templates: PromptTemplates::default(),
            timeout: Duration::from_secs(600),
        }
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    transport: Box<dyn Transport>,
    api_key: String,
    sleep: Box<dyn Fn(Duration) + Send>,
    attempts: Vec<u32>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig, transport: Box<dyn Transport>, api_key: String) -> Self {
        Self {
            config,
            transport,
            api_key,
            sleep: Box::new(std::thread::sleep),
            attempts: Vec::new(),
        }
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(config: LiveConfig, transport: Box<dyn Transport>) -> Result<Self, AgentError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(config, transport, key)),
            _ => Err(AgentError::Auth(format!("{API_KEY_ENV} is not set"))),
        }
    }

    /// Replaces the backoff sleep (tests use a no-op).
    pub fn with_sleep(mut self, sleep: impl Fn(Duration) + Send + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    /// Attempts used by each invocation so far.
    pub fn attempt_log(&self) -> &[u32] {
        &self.attempts
    }

    fn request_body(&self, task: &AgentTask) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "max_tokens": self.config.max_tokens,
            "system": SYSTEM_PROMPT,
            "messages": [{"role": "user", "content": self.config.templates.render(task)}],
        })
    }

    fn send(&mut self, body: &serde_json::Value) -> Result<String, AgentError> {
        let headers = [
            ("x-api-key", self.api_key.clone()),
            ("anthropic-version", self.config.api_version.clone()),
            ("content-type", "application/json".to_owned()),
        ];
        let max = self.config.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=max {
            if attempt > 1 {
                (self.sleep)(self.config.retry.backoff(attempt - 1));
            }
            match self.transport.post_json(&self.config.endpoint, &headers, body) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    self.attempts.push(attempt);
                    return Ok(resp.body);
                }
                Ok(resp) if resp.status == 401 || resp.status == 403 => {
                    self.attempts.push(attempt);
                    return Err(AgentError::Auth(format!("HTTP {}", resp.status)));
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last = format!("HTTP {}", resp.status);
                }
                Ok(resp) => {
                    self.attempts.push(attempt);
                    return Err(AgentError::BackendUnavailable {
                        attempts: attempt,
                        last: format!("HTTP {}: {}", resp.status, snippet(&resp.body)),
                    });
                }
                Err(e) => last = e.0,
            }
            log::warn!("live backend attempt {attempt}/{max} failed: {last}");
        }
        self.attempts.push(max);
        Err(AgentError::BackendUnavailable { attempts: max, last })
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}

#[derive(Deserialize)]
struct MessageResponse {
    #[serde(default)]
    content: Vec<ContentBlock>,
    #[serde(default)]
    usage: ProviderUsage,
}

#[derive(Deserialize)]
struct ContentBlock {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize, Default)]
struct ProviderUsage {
    #[serde(default)]
    input_tokens: u64,
    #[serde(default)]
    output_tokens: u64,
    #[serde(default)]
    cache_read_input_tokens: Option<u64>,
    #[serde(default)]
    cache_creation_input_tokens: Option<u64>,
}

/// Text strictly between the first begin marker and the following end marker.
pub fn extract_payload(text: &str) -> Option<&str> {
    let start = text.find(PAYLOAD_BEGIN)? + PAYLOAD_BEGIN.len();
    let len = text[start..].find(PAYLOAD_END)?;
    Some(&text[start..start + len])
}

fn strip_fence(s: &str) -> &str {
    let t = s.trim();
    match t.strip_prefix("```") {
        Some(rest) => {
            let body = rest.split_once('\n').map_or("", |(_, b)| b);
            body.trim_end().strip_suffix("```").unwrap_or(body)
        }
        None => t,
    }
}

fn parse_payload(task: &AgentTask, payload: &str) -> Result<AgentPayload, AgentError> {
    let malformed = |e: &dyn std::fmt::Display| AgentError::MalformedResponse(e.to_string());
    match task.kind {
        TaskKind::Check => {
            let v: CheckVerdict = toml::from_str(strip_fence(payload)).map_err(|e| malformed(&e))?;
            Ok(AgentPayload::Verdict(v))
        }
        TaskKind::LeanWork => {
            let source = strip_fence(payload).trim();
            if source.is_empty() {
                return Err(AgentError::MalformedResponse("empty Lean source".into()));
            }
            Ok(AgentPayload::Lean(LeanDraft {
                source: format!("{source}\n"),
            }))
        }
        TaskKind::PlanInitial | TaskKind::PlanRevise => {
            let mut value: toml::Table = toml::from_str(strip_fence(payload)).map_err(|e| malformed(&e))?;
            if let (false, Some(cause)) = (value.contains_key("cause"), task.cause) {
                value.insert("cause".into(), toml::Value::String(cause.as_str().into()));
            }
            let diff: PlanDiff = value.try_into().map_err(|e| malformed(&e))?;
            Ok(AgentPayload::Diff(diff))
        }
    }
}

impl AgentBackend for LiveBackend {
    fn name(&self) -> &'static str {
        "live"
    }

    fn respond(&mut self, task: &AgentTask) -> Result<BackendReply, AgentError> {
        let body = self.request_body(task);
        let raw = self.send(&body)?;
        let resp: MessageResponse =
            serde_json::from_str(&raw).map_err(|e| AgentError::MalformedResponse(format!("response body: {e}")))?;
        let text: String = resp
            .content
            .iter()
            .filter(|b| b.kind == "text")
            .map(|b| b.text.as_str())
            .collect();
        let usage = TokenUsage {
            prompt_tokens: resp.usage.input_tokens,
            completion_tokens: resp.usage.output_tokens,
            cache_read_tokens: resp.usage.cache_read_input_tokens.unwrap_or(0),
            cache_write_tokens: resp.usage.cache_creation_input_tokens.unwrap_or(0),
        };
        let payload = extract_payload(&text)
            .ok_or_else(|| AgentError::MalformedResponse("payload markers missing".into()))?;
        Ok(BackendReply {
            payload: parse_payload(task, payload)?,
            usage,
        })
    }
}
