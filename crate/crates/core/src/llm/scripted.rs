use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatClient, ChatRequest, LlmError, Role};

/// Reply text that makes a scripted client fail as if the endpoint were down.
pub const TRANSPORT_FAILURE: &str = "!transport";

/// A fixed reply, or a sequence played in order whose last entry repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    One(String),
    Seq(Vec<String>),
}

impl From<&str> for Reply {
    fn from(s: &str) -> Self {
        Reply::One(s.to_string())
    }
}

impl From<String> for Reply {
    fn from(s: String) -> Self {
        Reply::One(s)
    }
}

impl From<Vec<&str>> for Reply {
    fn from(v: Vec<&str>) -> Self {
        Reply::Seq(v.into_iter().map(str::to_string).collect())
    }
}

/// On-disk script format:
///
/// ```json
/// {
///   "default":    { "router": "{\"intent\": \"aggregate\"}" },
///   "by_subject": { "how many records?": { "generator": ["SELECT COUNT(*) FROM articles"] } }
/// }
/// ```
///
/// Replies for a request's subject take precedence over `default`. A reply
/// of `"!transport"` simulates an unreachable endpoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptFile {
    #[serde(default)]
    pub default: BTreeMap<Role, Reply>,
    #[serde(default)]
    pub by_subject: BTreeMap<String, BTreeMap<Role, Reply>>,
}

/// Deterministic stand-in for a model endpoint. Records every request.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    script: ScriptFile,
    cursors: Mutex<HashMap<(Option<String>, Role), usize>>,
    log: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_script(script: ScriptFile) -> Self {
        Self { script, ..Self::default() }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let script =
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::from_script(script))
    }

    pub fn on(mut self, role: Role, reply: impl Into<Reply>) -> Self {
        self.script.default.insert(role, reply.into());
        self
    }

    pub fn on_subject(mut self, subject: impl Into<String>, role: Role, reply: impl Into<Reply>) -> Self {
        self.script.by_subject.entry(subject.into()).or_default().insert(role, reply.into());
        self
    }

    /// Requests received so far, in order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn calls_for(&self, role: Role) -> usize {
        self.log.lock().unwrap().iter().filter(|r| r.purpose == role).count()
    }
}

impl ChatClient for ScriptedChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.log.lock().unwrap().push(request.clone());
        let role = request.purpose;
        let specific = request
            .subject
            .as_ref()
            .and_then(|s| self.script.by_subject.get(s).and_then(|m| m.get(&role)).map(|r| (Some(s.clone()), r)));
        let (key, reply) = match specific {
            Some(found) => found,
            None => match self.script.default.get(&role) {
                Some(r) => (None, r),
                None => return Err(LlmError::Unscripted(format!("{role} ({:?})", request.subject))),
            },
        };
        let text = match reply {
            Reply::One(text) => text.clone(),
            Reply::Seq(seq) if seq.is_empty() => return Err(LlmError::Unscripted(role.to_string())),
            Reply::Seq(seq) => {
                let mut cursors = self.cursors.lock().unwrap();
                let cursor = cursors.entry((key, role)).or_insert(0);
                let text = seq[(*cursor).min(seq.len() - 1)].clone();
                *cursor += 1;
                text
            }
        };
        if text == TRANSPORT_FAILURE {
            return Err(LlmError::Transport { attempts: 1, message: "scripted outage".into() });
        }
        Ok(text)
    }
}

/// Chat client backed by a closure.
pub struct FnChat<F>(pub F);

impl<F> ChatClient for FnChat<F>
where
    F: Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (self.0)(request)
    }
}
