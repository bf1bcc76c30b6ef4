use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatClient, ChatRequest, LlmError};
use crate::ratelimit::{Backoff, TokenBucket};

/// Where an OpenAI-compatible server lives and which environment variable
/// holds its bearer token (none for local servers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatEndpoint {
    pub base_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

impl ChatEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), api_key_env: None }
    }

    pub fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Blocking client for `POST {base}/v1/chat/completions`.
pub struct OpenAiClient {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    limiter: Option<Arc<TokenBucket>>,
    backoff: Backoff,
}

impl OpenAiClient {
    pub fn new(endpoint: &ChatEndpoint) -> Result<Self, LlmError> {
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingKey(var.clone()))?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Ok(Self { url: endpoint.completions_url(), api_key, agent, limiter: None, backoff: Backoff::default() })
    }

    /// Shares a rate limiter with other clients of the same endpoint.
    pub fn with_limiter(mut self, limiter: Arc<TokenBucket>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }
}

impl ChatClient for OpenAiClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let mut attempts = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            attempts += 1;
            let mut call = self.agent.post(&self.url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                call = call.header("Authorization", format!("Bearer {key}"));
            }
            let message = match call.send_json(request) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        let parsed: CompletionResponse =
                            resp.body_mut().read_json().map_err(|e| LlmError::BadResponse(e.to_string()))?;
                        let first = parsed
                            .choices
                            .into_iter()
                            .next()
                            .ok_or_else(|| LlmError::BadResponse("no choices".into()))?;
                        return Ok(first.message.content.unwrap_or_default());
                    }
                    let body = resp.body_mut().read_to_string().unwrap_or_default();
                    if status != 429 && status < 500 {
                        return Err(LlmError::Http { status, body });
                    }
                    format!("HTTP {status}: {body}")
                }
                Err(e) => e.to_string(),
            };
            if attempts > self.backoff.max_retries {
                return Err(LlmError::Transport { attempts, message });
            }
            tracing::debug!(url = %self.url, attempts, %message, "retrying chat completion");
            std::thread::sleep(self.backoff.delay(attempts));
        }
    }
}
