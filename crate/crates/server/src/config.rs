use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use matkb::agentflow::{AgentConfig, AgentTemplates, Agents, ModelRoute};
use matkb::exemplar::LearningMode;
use matkb::extraction::ExtractConfig;
use matkb::knowledgebase::{CurationPolicy, KnowledgeBase};
use matkb::llm::{ChatClient, ChatEndpoint, OpenAiClient, ScriptedChat};
use matkb::ratelimit::TokenBucket;
use serde::{Deserialize, Serialize};

use crate::ServerError;

/// One OpenAI-compatible server. Secrets stay in the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    /// Name of the variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Client-side pacing; unlimited when absent.
    #[serde(default)]
    pub requests_per_second: Option<f64>,
}

/// The service configuration file (TOML).
///
/// ```toml
/// db_url = "sqlite://matkb.sqlite"
/// export_dir = "exports"
/// learning_mode = "passive"
/// auth_token_env = "MATKB_TOKEN"
///
/// [endpoints.default]
/// base_url = "http://localhost:11434"
///
/// [routes]
/// generator = { model = "qwen2.5-coder:32b" }
/// router = { model = "llama3.1:8b" }
///
/// [agent]
/// max_repair_rounds = 3
/// [agent.limits]
/// row_cap = 10000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    /// `sqlite://<path>`, `sqlite::memory:` or a bare file path.
    pub db_url: String,
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default)]
    pub export_dir: Option<PathBuf>,
    #[serde(default = "default_mode")]
    pub learning_mode: LearningMode,
    /// Variable holding the shared bearer token; no auth when absent.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    #[serde(default)]
    pub endpoints: BTreeMap<String, EndpointConfig>,
    /// Per-role overrides on top of the default route table.
    #[serde(default)]
    pub routes: ModelRoute,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub curation: CurationPolicy,
    /// Directory of replacement agent prompt templates.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    /// Serve every endpoint from a scripted reply file instead of HTTP.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_mode() -> LearningMode {
    LearningMode::Passive
}

fn valid_env_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ServiceConfig =
            toml::from_str(&text).map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        // relative paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.export_dir, &mut cfg.templates_dir, &mut cfg.mock_script].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(rest) = cfg.db_url.strip_prefix("sqlite://") {
            if Path::new(rest).is_relative() {
                cfg.db_url = format!("sqlite://{}", base.join(rest).display());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// A route table with the configured overrides applied to the defaults.
    pub fn route(&self) -> ModelRoute {
        let mut route = ModelRoute::default();
        for (role, target) in &self.routes.0 {
            route.set(*role, target.clone());
        }
        route
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        let bad = |m: String| Err(ServerError::Config(m));
        let limits = &self.agent.limits;
        if limits.row_cap == 0 || limits.statement_timeout_ms == 0 {
            return bad("limits.row_cap and limits.statement_timeout_ms must be positive".into());
        }
        for (name, ep) in &self.endpoints {
            if let Some(var) = &ep.api_key_env {
                if !valid_env_name(var) {
                    return bad(format!("endpoint {name}: api_key_env {var:?} is not an environment variable name"));
                }
            }
            if ep.requests_per_second.is_some_and(|r| r.is_nan() || r <= 0.0) {
                return bad(format!("endpoint {name}: requests_per_second must be positive"));
            }
        }
        if let Some(var) = &self.auth_token_env {
            if !valid_env_name(var) {
                return bad(format!("auth_token_env {var:?} is not an environment variable name"));
            }
        }
        if self.mock_script.is_none() {
            self.route()
                .validate(self.endpoints.keys().map(String::as_str))
                .map_err(|e| ServerError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        let mut cfg = self.agent.clone();
        if let Some(dir) = &self.export_dir {
            cfg.export_dir = dir.clone();
        }
        cfg
    }

    /// Clients per endpoint name, or one scripted client under every name
    /// the route uses when `mock_script` is set.
    pub fn agents(&self) -> Result<Agents, ServerError> {
        let route = self.route();
        let mut clients: BTreeMap<String, Arc<dyn ChatClient>> = BTreeMap::new();
        if let Some(script) = &self.mock_script {
            let chat: Arc<dyn ChatClient> = Arc::new(
                ScriptedChat::from_file(script)
                    .map_err(|e| ServerError::Config(format!("{}: {e}", script.display())))?,
            );
            for target in route.0.values() {
                clients.insert(target.endpoint.clone(), chat.clone());
            }
        } else {
            for (name, ep) in &self.endpoints {
                let endpoint = ChatEndpoint { base_url: ep.base_url.clone(), api_key_env: ep.api_key_env.clone() };
                let mut client = OpenAiClient::new(&endpoint)?;
                if let Some(rate) = ep.requests_per_second {
                    client = client.with_limiter(Arc::new(TokenBucket::per_second(rate)));
                }
                clients.insert(name.clone(), Arc::new(client));
            }
        }
        let mut agents = Agents::new(route, clients).map_err(|e| ServerError::Config(e.to_string()))?;
        if let Some(dir) = &self.templates_dir {
            agents = agents.with_templates(
                AgentTemplates::load_dir(dir).map_err(|e| ServerError::Config(format!("{}: {e}", dir.display())))?,
            );
        }
        Ok(agents)
    }

    pub fn extract_config(&self, agents: &Agents) -> ExtractConfig {
        let model = agents.model_for(matkb::llm::Role::Extractor).map(|t| t.model);
        let cfg = ExtractConfig::default();
        match model {
            Some(m) => cfg.with_model(m),
            None => cfg,
        }
    }

    pub fn auth_token(&self) -> Result<Option<String>, ServerError> {
        match &self.auth_token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ServerError::Config(format!("auth token variable {var} is not set"))),
        }
    }
}

/// Opens the database named by a `sqlite://` URL or a plain path.
pub fn open_db(url: &str) -> Result<KnowledgeBase, ServerError> {
    let target = url.strip_prefix("sqlite://").or_else(|| url.strip_prefix("sqlite:")).unwrap_or(url);
    if target.contains("://") {
        return Err(ServerError::Config(format!("unsupported database URL {url}; only sqlite is built in")));
    }
    Ok(if target == ":memory:" { KnowledgeBase::open_in_memory()? } else { KnowledgeBase::open(target)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let cfg: ServiceConfig = toml::from_str(
            r#"
            db_url = "sqlite::memory:"
            learning_mode = "active"
            [endpoints.default]
            base_url = "http://localhost:11434"
            api_key_env = "LOCAL_KEY"
            [routes]
            generator = { model = "big" }
            [agent]
            max_repair_rounds = 2
            [agent.limits]
            row_cap = 50
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.route().get(matkb::llm::Role::Generator).unwrap().model, "big");
        assert_eq!(cfg.route().get(matkb::llm::Role::Router).unwrap().model, "light");
        assert_eq!(cfg.agent.limits.row_cap, 50);
        assert_eq!(cfg.agent.limits.statement_timeout_ms, 30_000);
    }

    #[test]
    fn rejects_inline_secret_and_zero_limits() {
        let inline = toml::from_str::<ServiceConfig>(
            "db_url = \"x\"\n[endpoints.a]\nbase_url = \"http://h\"\napi_key = \"sk-123\"\n",
        );
        assert!(inline.is_err());
        let cfg: ServiceConfig =
            toml::from_str("db_url = \"x\"\n[endpoints.default]\nbase_url = \"http://h\"\napi_key_env = \"sk-123\"\n")
                .unwrap();
        assert!(cfg.validate().is_err());
        let cfg: ServiceConfig = toml::from_str(
            "db_url = \"x\"\n[endpoints.default]\nbase_url = \"http://h\"\n[agent.limits]\nrow_cap = 0\n",
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn route_must_name_known_endpoints() {
        let cfg: ServiceConfig =
            toml::from_str("db_url = \"x\"\n[endpoints.local]\nbase_url = \"http://h\"\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
