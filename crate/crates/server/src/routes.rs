use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use matkb::agentflow::{run_session, ModelRoute, QuerySession, Validation};
use matkb::corpus::Document;
use matkb::exemplar::{judge_learning_value, store_example, ExampleEntry, ExemplarError, Judgement, LearningMode};
use matkb::extraction::{extract, ExtractionResult};
use matkb::knowledgebase::{AuditEntry, Cell};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::AppState;

type Shared = Arc<AppState>;

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl ApiError {
    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

// Agent calls and SQLite are blocking; keep them off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

/// All API routes. Requests need `Authorization: Bearer <token>` when the
/// state has a token.
pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/examples", post(examples))
        .route("/export/{id}", get(export))
        .route("/audit", get(audit))
        .route("/models", get(get_models).put(put_models))
        .route("/extract", post(extract_doc))
        .route_layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

async fn auth(State(state): State<Shared>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(token) = &state.auth_token {
        let given =
            headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError(StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into()).into_response();
        }
    }
    next.run(req).await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRequest {
    pub query: String,
    #[serde(default)]
    pub learning_mode: Option<LearningMode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResponse {
    pub session_id: String,
    pub status: String,
    pub intent: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<Cell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export_id: Option<String>,
    pub validation: Option<Validation>,
    pub learning_mode: LearningMode,
    /// Passive mode: the client may offer to save this session.
    pub storable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judgement: Option<Judgement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stored_example: Option<ExampleEntry>,
    pub trace: QuerySession,
}

async fn query(State(state): State<Shared>, Json(req): Json<QueryRequest>) -> Result<Response, ApiError> {
    if req.query.trim().is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "query is empty".into()));
    }
    let mode = req.learning_mode.unwrap_or(state.learning_mode);
    let body = blocking(move || answer(&state, &req.query, mode)).await?;
    let status = if body.trace.endpoint_unavailable() { StatusCode::SERVICE_UNAVAILABLE } else { StatusCode::OK };
    Ok((status, Json(body)).into_response())
}

fn answer(state: &AppState, query: &str, mode: LearningMode) -> QueryResponse {
    let session = run_session(query, &state.deps());
    let eligible = session.succeeded() && session.validation.as_ref().is_some_and(|v| v.aligned);
    let (mut judgement, mut stored) = (None, None);
    if eligible && mode == LearningMode::Active {
        // judge on a separate connection so the model call does not hold the lock
        let judged = state
            .kb()
            .read_only()
            .map_err(ExemplarError::from)
            .and_then(|conn| judge_learning_value(&session, &conn, &state.agents));
        match judged {
            Ok(j) => {
                if j.store {
                    match store_example(&state.kb(), &session, LearningMode::Active, &state.schema) {
                        Ok((entry, _)) => stored = Some(entry),
                        Err(e) => {
                            tracing::warn!(session = %session.id, error = %e, "storing example failed")
                        }
                    }
                }
                judgement = Some(j);
            }
            Err(e) => tracing::warn!(session = %session.id, error = %e, "learner judgement failed"),
        }
    }
    QueryResponse {
        session_id: session.id.clone(),
        status: if session.succeeded() { "succeeded" } else { "failed" }.into(),
        intent: session.intent.map(|i| i.as_str().to_string()),
        answer: session.answer().cloned(),
        export_id: session.export_id().map(str::to_string),
        validation: session.validation.clone(),
        learning_mode: mode,
        storable: eligible && mode == LearningMode::Passive,
        judgement,
        stored_example: stored,
        trace: session,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleRequest {
    pub session_id: String,
}

async fn examples(State(state): State<Shared>, Json(req): Json<ExampleRequest>) -> Result<Response, ApiError> {
    blocking(move || {
        // sessions are looked up in the audit log so they survive restarts
        let entry = state
            .kb()
            .audit_entry(&req.session_id)
            .map_err(ApiError::internal)?
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown session {}", req.session_id)))?;
        let session: QuerySession = serde_json::from_value(entry.trace)
            .map_err(|e| ApiError::internal(format!("unreadable session trace: {e}")))?;
        match store_example(&state.kb(), &session, LearningMode::Passive, &state.schema) {
            Ok((entry, created)) => {
                let code = if created { StatusCode::CREATED } else { StatusCode::OK };
                Ok((code, Json(entry)).into_response())
            }
            Err(e @ (ExemplarError::NotEligible(_) | ExemplarError::Unsafe(_))) => {
                Err(ApiError(StatusCode::CONFLICT, e.to_string()))
            }
            Err(e) => Err(ApiError::internal(e)),
        }
    })
    .await?
}

async fn export(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("unknown export {id}"));
    // ids are uuids; anything else could escape the export directory
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_hexdigit() || c == '-') {
        return Err(not_found());
    }
    let path = state.agent_config.export_dir.join(format!("{id}.csv"));
    let bytes = match tokio::fs::read(&path).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
        Err(e) => return Err(ApiError::internal(e)),
    };
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{id}.csv\"")),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct AuditParams {
    limit: Option<usize>,
}

async fn audit(State(state): State<Shared>, Query(p): Query<AuditParams>) -> Result<Json<Vec<AuditEntry>>, ApiError> {
    let limit = p.limit.unwrap_or(50).min(1000);
    blocking(move || state.kb().recent_audit(limit).map(Json).map_err(ApiError::internal)).await?
}

async fn get_models(State(state): State<Shared>) -> Json<ModelRoute> {
    Json(state.agents.route_table())
}

async fn put_models(State(state): State<Shared>, Json(route): Json<ModelRoute>) -> Result<Json<ModelRoute>, ApiError> {
    state.agents.set_route(route).map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    tracing::info!("model route updated");
    Ok(Json(state.agents.route_table()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractRequest {
    pub document: Document,
}

async fn extract_doc(
    State(state): State<Shared>,
    Json(req): Json<ExtractRequest>,
) -> Result<Json<ExtractionResult>, ApiError> {
    blocking(move || {
        let target = state
            .agents
            .model_for(matkb::llm::Role::Extractor)
            .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, "no extractor route".into()))?;
        let client = state
            .agents
            .client(&target.endpoint)
            .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, format!("no endpoint {}", target.endpoint)))?;
        let config = state.extract_config.clone().with_model(target.model);
        extract(&req.document, &*client, &config)
            .map(Json)
            .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
    })
    .await?
}
