//! Guarded natural-language query pipeline.
//!
//! A question is routed to an intent, turned into SQL, checked by the
//! parser-based safety gate, run on a read-only connection, repaired from
//! backend errors a bounded number of times, validated and summarized.
//! Every session ends with exactly one audit entry.

mod agents;
mod execute;
mod safety;
mod schema_info;
mod session;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::llm::{ChatClient, ChatRequest, LlmError, Message, Role};

pub use agents::{
    extract_sql, generate_sql, heuristic_intent, parse_intent, parse_validation, repair, route, validate_result,
    AgentError, Generated, Intent, IntentSource, Routed, Validation,
};
pub use execute::{ExecError, Executor, Limits, SqliteExecutor};
pub use safety::{approve, safety_check, ApprovedSql, SafetyVerdict, DENIED_FUNCTIONS};
pub use schema_info::{ColumnInfo, SchemaInfo, TableInfo};
pub use session::{
    run_session, AuditSink, CandidateOrigin, ExampleSource, ExecutionOutcome, Failure, MemoryAudit, QuerySession,
    SessionDeps, SessionStatus, SqlCandidate, Stage, Step, Summary,
};

/// Roles the query pipeline calls.
pub const AGENT_ROLES: [Role; 6] =
    [Role::Router, Role::Generator, Role::Repairer, Role::Validator, Role::Summarizer, Role::Learner];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelTarget {
    pub model: String,
    /// Name of a configured endpoint.
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
}

fn default_endpoint() -> String {
    "default".into()
}

impl ModelTarget {
    pub fn new(model: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self { model: model.into(), endpoint: endpoint.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RouteError {
    #[error("role {0} has no model")]
    Unmapped(Role),
    #[error("role {0} has an empty model name")]
    EmptyModel(Role),
    #[error("role {role} uses unknown endpoint {endpoint:?}")]
    UnknownEndpoint { role: Role, endpoint: String },
}

/// Which model, on which endpoint, serves each role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelRoute(pub BTreeMap<Role, ModelTarget>);

impl Default for ModelRoute {
    /// Stronger model for writing and fixing SQL, a light one for the
    /// short judgement calls.
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for role in Role::ALL {
            let model = match role {
                Role::Generator | Role::Repairer => "strong",
                Role::Router | Role::Validator | Role::Summarizer | Role::Learner => "light",
                Role::Extractor | Role::Classifier => "extractor",
            };
            m.insert(role, ModelTarget::new(model, default_endpoint()));
        }
        Self(m)
    }
}

impl ModelRoute {
    pub fn get(&self, role: Role) -> Option<&ModelTarget> {
        self.0.get(&role)
    }

    pub fn set(&mut self, role: Role, target: ModelTarget) {
        self.0.insert(role, target);
    }

    /// Every role mapped to a non-empty model on a known endpoint.
    pub fn validate<'a>(&self, endpoints: impl IntoIterator<Item = &'a str> + Clone) -> Result<(), RouteError> {
        for role in Role::ALL {
            let t = self.0.get(&role).ok_or(RouteError::Unmapped(role))?;
            if t.model.trim().is_empty() {
                return Err(RouteError::EmptyModel(role));
            }
            if !endpoints.clone().into_iter().any(|e| e == t.endpoint) {
                return Err(RouteError::UnknownEndpoint { role, endpoint: t.endpoint.clone() });
            }
        }
        Ok(())
    }
}

/// System prompts for the query agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentTemplates {
    pub router: String,
    pub generator: String,
    pub repairer: String,
    pub validator: String,
    pub summarizer: String,
    pub learner: String,
}

impl Default for AgentTemplates {
    fn default() -> Self {
        Self {
            router: include_str!("../../templates/agents/router.txt").into(),
            generator: include_str!("../../templates/agents/generator.txt").into(),
            repairer: include_str!("../../templates/agents/repairer.txt").into(),
            validator: include_str!("../../templates/agents/validator.txt").into(),
            summarizer: include_str!("../../templates/agents/summarizer.txt").into(),
            learner: include_str!("../../templates/agents/learner.txt").into(),
        }
    }
}

impl AgentTemplates {
    /// Reads `<role>.txt` files from `dir`; missing files keep the default.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        for (name, slot) in [
            ("router", &mut t.router),
            ("generator", &mut t.generator),
            ("repairer", &mut t.repairer),
            ("validator", &mut t.validator),
            ("summarizer", &mut t.summarizer),
            ("learner", &mut t.learner),
        ] {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }
}

/// The answer to one model call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub text: String,
    pub model: String,
}

/// Model clients per endpoint plus the swappable role table.
pub struct Agents {
    route: RwLock<ModelRoute>,
    clients: BTreeMap<String, Arc<dyn ChatClient>>,
    pub templates: AgentTemplates,
}

impl Agents {
    pub fn new(route: ModelRoute, clients: BTreeMap<String, Arc<dyn ChatClient>>) -> Result<Self, RouteError> {
        route.validate(clients.keys().map(String::as_str))?;
        Ok(Self { route: RwLock::new(route), clients, templates: AgentTemplates::default() })
    }

    /// Every role on one client under the default route.
    pub fn single(client: impl ChatClient + 'static) -> Self {
        let mut clients: BTreeMap<String, Arc<dyn ChatClient>> = BTreeMap::new();
        clients.insert(default_endpoint(), Arc::new(client));
        Self { route: RwLock::new(ModelRoute::default()), clients, templates: AgentTemplates::default() }
    }

    pub fn with_templates(mut self, templates: AgentTemplates) -> Self {
        self.templates = templates;
        self
    }

    pub fn route_table(&self) -> ModelRoute {
        self.route.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &str> + Clone {
        self.clients.keys().map(String::as_str)
    }

    /// Replaces the role table. Calls already in flight finish on the old one.
    pub fn set_route(&self, route: ModelRoute) -> Result<(), RouteError> {
        route.validate(self.endpoints())?;
        *self.route.write().unwrap_or_else(|p| p.into_inner()) = route;
        Ok(())
    }

    pub fn client(&self, endpoint: &str) -> Option<Arc<dyn ChatClient>> {
        self.clients.get(endpoint).cloned()
    }

    pub fn model_for(&self, role: Role) -> Option<ModelTarget> {
        self.route.read().unwrap_or_else(|p| p.into_inner()).get(role).cloned()
    }

    pub fn call(&self, role: Role, messages: Vec<Message>, subject: &str) -> Result<AgentReply, LlmError> {
        let target = self.model_for(role).ok_or_else(|| LlmError::Unscripted(format!("no route for {role}")))?;
        let client = self
            .clients
            .get(&target.endpoint)
            .ok_or_else(|| LlmError::Unscripted(format!("no endpoint {}", target.endpoint)))?;
        let req = ChatRequest::new(role, target.model.clone(), messages).with_subject(subject);
        let text = client.complete(&req)?;
        Ok(AgentReply { text, model: target.model })
    }
}

/// Knobs for [`run_session`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_repair_rounds: u32,
    pub limits: Limits,
    /// Stored examples offered to the generator.
    pub examples_k: usize,
    pub export_dir: PathBuf,
    /// Rows kept in the serialized trace.
    pub preview_rows: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_repair_rounds: 3,
            limits: Limits::default(),
            examples_k: 3,
            export_dir: std::env::temp_dir().join("matkb-exports"),
            preview_rows: 20,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedChat;

    #[test]
    fn default_route_maps_every_role() {
        let r = ModelRoute::default();
        r.validate(["default"]).unwrap();
        assert_eq!(r.get(Role::Generator).unwrap().model, "strong");
        assert_eq!(r.get(Role::Router).unwrap().model, "light");
        assert!(matches!(r.validate(["other"]), Err(RouteError::UnknownEndpoint { .. })));
        let mut partial = r.clone();
        partial.0.remove(&Role::Learner);
        assert_eq!(partial.validate(["default"]), Err(RouteError::Unmapped(Role::Learner)));
    }

    #[test]
    fn route_serializes_by_role_name() {
        let v = serde_json::to_value(ModelRoute::default()).unwrap();
        assert_eq!(v["repairer"]["model"], "strong");
    }

    #[test]
    fn hot_swap_changes_the_model_sent() {
        let chat = Arc::new(ScriptedChat::new().on(Role::Generator, "SELECT 1"));
        let agents = Agents::single(Arc::clone(&chat));
        let mut route = agents.route_table();
        route.set(Role::Generator, ModelTarget::new("bigger", "default"));
        agents.set_route(route).unwrap();
        let reply = agents.call(Role::Generator, vec![Message::user("q")], "q").unwrap();
        assert_eq!(reply.model, "bigger");
        assert_eq!(chat.requests()[0].model, "bigger");
        let mut bad = agents.route_table();
        bad.set(Role::Router, ModelTarget::new("", "default"));
        assert!(agents.set_route(bad).is_err());
    }
}
