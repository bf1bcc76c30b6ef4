//! Chat-completion clients.
//!
//! Every model call in the crate goes through [`ChatClient`]. The HTTP
//! implementation speaks the OpenAI-compatible `/v1/chat/completions`
//! protocol, so hosted APIs and local servers (LM Studio, Ollama, vLLM) are
//! interchangeable. Scripted clients stand in for models in tests and offline
//! runs.

mod openai;
mod scripted;

use serde::{Deserialize, Serialize};

pub use openai::{ChatEndpoint, OpenAiClient};
pub use scripted::{FnChat, Reply, ScriptFile, ScriptedChat, TRANSPORT_FAILURE};

/// What a model call is for. Used for routing and by scripted clients; never
/// sent over the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Extractor,
    Classifier,
    Router,
    Generator,
    Repairer,
    Validator,
    Summarizer,
    Learner,
}

impl Role {
    pub const ALL: [Role; 8] = [
        Role::Extractor,
        Role::Classifier,
        Role::Router,
        Role::Generator,
        Role::Repairer,
        Role::Validator,
        Role::Summarizer,
        Role::Learner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Extractor => "extractor",
            Role::Classifier => "classifier",
            Role::Router => "router",
            Role::Generator => "generator",
            Role::Repairer => "repairer",
            Role::Validator => "validator",
            Role::Summarizer => "summarizer",
            Role::Learner => "learner",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub purpose: Role,
    /// The question or document this call concerns.
    #[serde(skip)]
    pub subject: Option<String>,
}

impl ChatRequest {
    /// Deterministic sampling: temperature 0 and a fixed seed.
    pub fn new(purpose: Role, model: impl Into<String>, messages: Vec<Message>) -> Self {
        Self { model: model.into(), messages, temperature: 0.0, seed: Some(7), purpose, subject: None }
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum LlmError {
    #[error("endpoint unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("missing API key: environment variable {0} is not set")]
    MissingKey(String),
    #[error("no scripted reply for {0}")]
    Unscripted(String),
}

impl LlmError {
    pub fn is_transport(&self) -> bool {
        matches!(self, LlmError::Transport { .. })
    }
}

/// A chat-completion backend returning the assistant message text.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl<T: ChatClient + ?Sized> ChatClient for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Removes a surrounding Markdown code fence (with optional language tag).
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    let rest = rest.strip_suffix("```").unwrap_or(rest);
    rest.trim()
}
