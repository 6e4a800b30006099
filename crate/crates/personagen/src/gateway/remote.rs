//! OpenAI-compatible chat-completions backend.
//!
//! Speaks the standard HTTP JSON protocol: `POST {base_url}/chat/completions`
//! with `model`, `temperature`, and system+user `messages`; consumes the
//! first choice's message content. The API key is read from a configurable
//! environment variable and never appears in configuration files or flags.

use std::time::Duration;

use crate::error::{Error, Result};

use super::{ChatRequest, LlmBackend};

/// Remote chat-completions client.
#[derive(Debug)]
pub struct RemoteBackend {
    base_url: String,
    api_key_env: String,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    /// Build a client for `base_url` (e.g. `https://api.openai.com/v1`),
    /// reading the bearer token from the `api_key_env` environment variable
    /// at request time.
    pub fn new(base_url: &str, api_key_env: &str, timeout_ms: u64) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|err| {
                Error::BackendUnavailable(format!("client construction failed: {err}"))
            })?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key_env: api_key_env.to_string(),
            client,
        })
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.api_key_env).map_err(|_| {
            Error::BackendUnavailable(format!(
                "environment variable `{}` is not set",
                self.api_key_env
            ))
        })
    }
}

impl LlmBackend for RemoteBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = serde_json::json!({
            "model": req.model,
            "temperature": req.temperature,
            "messages": [
                { "role": "system", "content": req.system },
                { "role": "user", "content": req.user },
            ],
        });
        let response = self
            .client
            .post(&url)
            .bearer_auth(self.api_key()?)
            .json(&body)
            .send()
            .map_err(|err| Error::BackendUnavailable(format!("request to {url} failed: {err}")))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|err| Error::BackendUnavailable(format!("reading response failed: {err}")))?;
        if !status.is_success() {
            return Err(Error::BackendUnavailable(format!(
                "HTTP {status} from {url}: {}",
                snippet(&text)
            )));
        }
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|err| {
            Error::BackendUnavailable(format!("malformed completion response: {err}"))
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                Error::BackendUnavailable(format!(
                    "response missing choices[0].message.content: {}",
                    snippet(&text)
                ))
            })
    }

    fn name(&self) -> &str {
        "remote"
    }
}

fn snippet(text: &str) -> &str {
    let end = text
        .char_indices()
        .take(240)
        .last()
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    &text[..end]
}
