use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Settings for an OpenAI-compatible chat completions server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL up to and including the version segment, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token, if any.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    5
}

fn default_max_tokens() -> u32 {
    1024
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            token_env: None,
            max_concurrent: default_concurrency(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_tokens: default_max_tokens(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_url.is_empty() || self.model.is_empty() {
            return Err(Error::config("endpoint needs a base URL and a model name"));
        }
        if self.max_concurrent == 0 || self.timeout_secs == 0 {
            return Err(Error::config("endpoint concurrency and timeout must be positive"));
        }
        Ok(())
    }

    pub fn chat_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn token(&self) -> Result<Option<String>> {
        match &self.token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::config(format!("environment variable {var} is not set"))),
        }
    }
}

/// Greedy single-message request for one rendered prompt.
pub fn chat_request_body(cfg: &EndpointConfig, prompt: &str) -> Value {
    json!({
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0.0,
        "max_tokens": cfg.max_tokens,
    })
}

/// Text of the first choice; accepts both chat and legacy completion shapes.
pub fn extract_completion(response: &Value) -> Result<String> {
    let choice = response
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| Error::Endpoint("response has no choices".into()))?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Endpoint("first choice carries no text".into()))
}
