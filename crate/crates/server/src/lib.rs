//! HTTP front end for the knowledge base: guarded question answering,
//! example curation, exports, audit browsing, model routing and extraction.

mod config;
mod routes;

use std::sync::{Arc, Mutex};

use matkb::agentflow::{AgentConfig, Agents, SchemaInfo, SessionDeps, SqliteExecutor};
use matkb::exemplar::LearningMode;
use matkb::extraction::ExtractConfig;
use matkb::knowledgebase::{KbError, KnowledgeBase};
use matkb::llm::LlmError;

pub use config::{open_db, EndpointConfig, ServiceConfig};
pub use routes::{router, ExampleRequest, ExtractRequest, QueryRequest, QueryResponse};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything a request handler needs. The only write paths are the ones
/// [`KnowledgeBase`] exposes; queries go through the read-only executor.
pub struct AppState {
    pub kb: Mutex<KnowledgeBase>,
    pub executor: SqliteExecutor,
    pub agents: Agents,
    pub schema: SchemaInfo,
    pub agent_config: AgentConfig,
    pub extract_config: ExtractConfig,
    pub learning_mode: LearningMode,
    pub auth_token: Option<String>,
}

impl AppState {
    pub fn new(kb: KnowledgeBase, agents: Agents, agent_config: AgentConfig) -> Result<Self, ServerError> {
        let executor = SqliteExecutor::new(&kb)?;
        let schema = SchemaInfo::load(kb.connection())?;
        std::fs::create_dir_all(&agent_config.export_dir)?;
        Ok(Self {
            kb: Mutex::new(kb),
            executor,
            agents,
            schema,
            agent_config,
            extract_config: ExtractConfig::default(),
            learning_mode: LearningMode::Passive,
            auth_token: None,
        })
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ServerError> {
        let kb = open_db(&cfg.db_url)?;
        let agents = cfg.agents()?;
        let extract_config = cfg.extract_config(&agents);
        let mut state = Self::new(kb, agents, cfg.agent_config())?;
        state.extract_config = extract_config;
        state.learning_mode = cfg.learning_mode;
        state.auth_token = cfg.auth_token()?;
        Ok(state)
    }

    pub fn with_learning_mode(mut self, mode: LearningMode) -> Self {
        self.learning_mode = mode;
        self
    }

    pub fn with_auth_token(mut self, token: impl Into<String>) -> Self {
        self.auth_token = Some(token.into());
        self
    }

    pub fn deps(&self) -> SessionDeps<'_> {
        SessionDeps {
            agents: &self.agents,
            executor: &self.executor,
            schema: &self.schema,
            examples: Some(&self.kb),
            audit: &self.kb,
            config: &self.agent_config,
        }
    }

    pub(crate) fn kb(&self) -> std::sync::MutexGuard<'_, KnowledgeBase> {
        self.kb.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// Binds `cfg.listen` and serves until Ctrl-C; in-flight requests finish
/// before the function returns.
pub async fn serve(cfg: ServiceConfig) -> Result<(), ServerError> {
    let state = Arc::new(AppState::from_config(&cfg)?);
    let listener = tokio::net::TcpListener::bind(&cfg.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    Ok(())
}
