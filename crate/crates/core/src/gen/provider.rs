// SPDX-License-Identifier: Apache-2.0

//! Chat-completion providers.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, backoff_base_ms: 500 }
    }
}

/// Provider settings. The API key is read from `api_key_env` at request time and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub id: String,
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_max_tokens() -> u32 {
    2048
}
fn default_timeout() -> u64 {
    120
}
fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Deserialize)]
struct ProviderFile {
    provider: Vec<ProviderConfig>,
}

/// Reads `[[provider]]` stanzas from a TOML document.
pub fn load_provider_configs(text: &str) -> Result<Vec<ProviderConfig>, ProviderError> {
    let f: ProviderFile = toml::from_str(text).map_err(|e| ProviderError::Config(e.to_string()))?;
    Ok(f.provider)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("transport error: {0}")]
    Other(String),
}

impl TransportError {
    pub fn retryable(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Other(_) => true,
            TransportError::Status(s) => *s == 429 || *s >= 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("{0}")]
    Transport(TransportError),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: TransportError },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("configuration: {0}")]
    Config(String),
}

/// One HTTP POST carrying a JSON body.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value, timeout: Duration) -> Result<Value, TransportError>;
}

/// Blocking HTTPS transport.
#[derive(Debug, Default)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value, timeout: Duration) -> Result<Value, TransportError> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        if let Some(k) = bearer {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Other(e.without_url().to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status(status.as_u16()));
        }
        resp.json::<Value>().map_err(|e| TransportError::Other(e.without_url().to_string()))
    }
}

/// Token accounting reported by a provider.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
    pub attempts: u32,
}

/// Anything that can answer a prompt.
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn temperature(&self) -> f64;
    fn concurrency(&self) -> usize {
        4
    }
    /// Whether generations carry a wall-clock timestamp.
    fn timestamps(&self) -> bool {
        true
    }
    fn complete(&self, spec: &ProblemSpec, prompt: &str, regen_index: u32) -> Result<Completion, ProviderError>;
}

/// A chat-completion endpoint behind a [`Transport`].
pub struct ChatProvider<T: Transport> {
    pub config: ProviderConfig,
    transport: T,
    calls: AtomicU64,
    sleep: fn(Duration),
}

impl ChatProvider<HttpTransport> {
    pub fn http(config: ProviderConfig) -> Self {
        ChatProvider::new(config, HttpTransport::default())
    }
}

impl<T: Transport> ChatProvider<T> {
    pub fn new(config: ProviderConfig, transport: T) -> Self {
        ChatProvider { config, transport, calls: AtomicU64::new(0), sleep: std::thread::sleep }
    }

    /// Replaces the backoff sleep (tests).
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Transport calls made so far, retries included.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    /// Sends `prompt`, retrying transient failures with exponential backoff.
    pub fn request_completion(&self, prompt: &str) -> Result<Completion, ProviderError> {
        let key = match &self.config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| ProviderError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let body = self.request_body(prompt);
        let timeout = Duration::from_secs(self.config.timeout_secs);
        let max = self.config.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.calls.fetch_add(1, Ordering::SeqCst);
            log::debug!("{}: request attempt {attempt}/{max}", self.config.id);
            match self.transport.post_json(&self.config.endpoint, key.as_deref(), &body, timeout) {
                Ok(v) => {
                    let text = v
                        .pointer("/choices/0/message/content")
                        .or_else(|| v.pointer("/choices/0/text"))
                        .and_then(Value::as_str)
                        .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".into()))?;
                    let usage = v.get("usage").and_then(|u| serde_json::from_value::<Usage>(u.clone()).ok());
                    return Ok(Completion { text: text.to_string(), usage, attempts: attempt });
                }
                Err(e) if e.retryable() && attempt < max => {
                    let wait = self.config.retry.backoff_base_ms.saturating_mul(1u64 << (attempt - 1).min(16));
                    log::warn!("{}: {e}; retrying in {wait} ms", self.config.id);
                    (self.sleep)(Duration::from_millis(wait));
                }
                Err(e) if e.retryable() => return Err(ProviderError::Exhausted { attempts: attempt, last: e }),
                Err(e) => return Err(ProviderError::Transport(e)),
            }
        }
    }
}

impl<T: Transport> Provider for ChatProvider<T> {
    fn id(&self) -> &str {
        &self.config.id
    }

    fn temperature(&self) -> f64 {
        self.config.temperature
    }

    fn concurrency(&self) -> usize {
        self.config.concurrency.max(1)
    }

    fn complete(&self, _spec: &ProblemSpec, prompt: &str, _regen_index: u32) -> Result<Completion, ProviderError> {
        self.request_completion(prompt)
    }
}
