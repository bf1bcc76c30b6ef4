use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::agents::{generate_sql, repair, route, validate_result, Intent, IntentSource, Validation};
use super::{approve, safety_check, AgentConfig, Agents, Executor, SafetyVerdict, SchemaInfo};
use crate::exemplar::ExampleEntry;
use crate::knowledgebase::{export_csv_file, AuditEntry, Cell, Fingerprint, KnowledgeBase, RowSet};
use crate::llm::{Message, Role};

/// Where audit entries go. Appends are serialized by the implementation.
pub trait AuditSink: Send + Sync {
    fn append(&self, entry: &AuditEntry) -> Result<(), String>;
}

impl AuditSink for Mutex<KnowledgeBase> {
    fn append(&self, entry: &AuditEntry) -> Result<(), String> {
        let kb = self.lock().unwrap_or_else(|p| p.into_inner());
        kb.append_audit(entry).map_err(|e| e.to_string())
    }
}

/// Audit log kept in memory, for tests and dry runs.
#[derive(Debug, Default)]
pub struct MemoryAudit(pub Mutex<Vec<AuditEntry>>);

impl MemoryAudit {
    pub fn entries(&self) -> Vec<AuditEntry> {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl AuditSink for MemoryAudit {
    fn append(&self, entry: &AuditEntry) -> Result<(), String> {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).push(entry.clone());
        Ok(())
    }
}

/// Supplies stored examples for the generator prompt.
pub trait ExampleSource: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Vec<ExampleEntry>;
}

pub struct SessionDeps<'a> {
    pub agents: &'a Agents,
    pub executor: &'a dyn Executor,
    pub schema: &'a SchemaInfo,
    pub examples: Option<&'a dyn ExampleSource>,
    pub audit: &'a dyn AuditSink,
    pub config: &'a AgentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrigin {
    Generated,
    Repaired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default)]
    pub truncated: bool,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlCandidate {
    pub sql: String,
    pub origin: CandidateOrigin,
    pub model: String,
    pub verdict: SafetyVerdict,
    /// Absent when the safety gate denied the candidate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Route,
    Generate,
    Safety,
    Execute,
    Repair,
    Validate,
    Summarize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
    /// A model endpoint could not be reached.
    #[serde(default)]
    pub endpoint_unavailable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Number {
        value: Cell,
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Export {
        export_id: String,
        rows: usize,
        /// CSV lines written, header included.
        lines: usize,
        truncated: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Succeeded,
    Failed,
}

/// One timed agent step in the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub agent: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub elapsed_ms: u64,
    pub outcome: String,
}

/// Full record of one question: every candidate, verdict, execution and
/// decision. Serializes to the audit trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySession {
    pub id: String,
    pub created_at: String,
    pub user_query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent_source: Option<IntentSource>,
    pub sql_candidates: Vec<SqlCandidate>,
    /// Query texts of the stored examples shown to the generator.
    pub examples_used: Vec<String>,
    #[serde(skip)]
    pub result: Option<RowSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result_preview: Option<RowSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result_fingerprint: Option<Fingerprint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<Validation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    pub status: SessionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    pub steps: Vec<Step>,
    pub elapsed_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_entry_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_error: Option<String>,
}

impl QuerySession {
    fn new(query: &str) -> Self {
        Self {
            id: uuid::Uuid::new_v4().to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
            user_query: query.to_string(),
            intent: None,
            intent_source: None,
            sql_candidates: Vec::new(),
            examples_used: Vec::new(),
            result: None,
            result_preview: None,
            result_fingerprint: None,
            validation: None,
            summary: None,
            status: SessionStatus::Failed,
            failure: None,
            steps: Vec::new(),
            elapsed_ms: 0,
            audit_entry_id: None,
            audit_error: None,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.status == SessionStatus::Succeeded
    }

    pub fn repaired_count(&self) -> usize {
        self.sql_candidates.iter().filter(|c| c.origin == CandidateOrigin::Repaired).count()
    }

    /// The candidate whose execution produced the result.
    pub fn final_sql(&self) -> Option<&str> {
        self.sql_candidates.iter().rev().find(|c| c.execution.as_ref().is_some_and(|e| e.ok)).map(|c| c.sql.as_str())
    }

    /// The scalar answer of an aggregate session.
    pub fn answer(&self) -> Option<&Cell> {
        match &self.summary {
            Some(Summary::Number { value, .. }) => Some(value),
            _ => None,
        }
    }

    pub fn export_id(&self) -> Option<&str> {
        match &self.summary {
            Some(Summary::Export { export_id, .. }) => Some(export_id),
            _ => None,
        }
    }

    pub fn endpoint_unavailable(&self) -> bool {
        self.failure.as_ref().is_some_and(|f| f.endpoint_unavailable)
    }

    fn step(&mut self, agent: &str, model: Option<String>, started: Instant, outcome: impl Into<String>) {
        self.steps.push(Step { agent: agent.into(), model, elapsed_ms: ms(started), outcome: outcome.into() });
    }

    fn fail(&mut self, stage: Stage, message: impl Into<String>, endpoint_unavailable: bool) {
        self.status = SessionStatus::Failed;
        self.failure = Some(Failure { stage, message: message.into(), endpoint_unavailable });
    }
}

fn ms(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}

/// Answers `query` end to end. Never panics on agent or database failure;
/// the outcome, good or bad, is in the returned session and in exactly one
/// audit entry.
pub fn run_session(query: &str, deps: &SessionDeps<'_>) -> QuerySession {
    let started = Instant::now();
    let mut s = QuerySession::new(query);
    if let Err((stage, msg, unavailable)) = drive(&mut s, deps) {
        s.fail(stage, msg, unavailable);
    } else {
        s.status = SessionStatus::Succeeded;
    }
    s.elapsed_ms = ms(started);
    write_audit(&mut s, deps.audit);
    s
}

type StageError = (Stage, String, bool);

fn drive(s: &mut QuerySession, deps: &SessionDeps<'_>) -> Result<(), StageError> {
    let query = s.user_query.clone();
    let cfg = deps.config;

    let t = Instant::now();
    let routed = route(&query, deps.agents);
    s.intent = Some(routed.intent);
    s.intent_source = Some(routed.source);
    let outcome = match &routed.error {
        Some(e) => format!("{} (fallback: {e})", routed.intent.as_str()),
        None => routed.intent.as_str().to_string(),
    };
    s.step("router", routed.model.clone(), t, outcome);
    if routed.intent == Intent::Unsupported {
        return Err((Stage::Route, "request is not a read-only question about the knowledge base".into(), false));
    }

    let examples = match deps.examples {
        Some(src) if cfg.examples_k > 0 => src.retrieve(&query, cfg.examples_k),
        _ => Vec::new(),
    };
    s.examples_used = examples.iter().map(|e| e.query_text.clone()).collect();

    let t = Instant::now();
    let gen = generate_sql(&query, deps.schema, &examples, deps.agents).map_err(|e| {
        let unavailable = e.is_transport();
        (Stage::Generate, e.to_string(), unavailable)
    });
    let gen = match gen {
        Ok(g) => {
            s.step("generator", Some(g.model.clone()), t, "sql generated");
            g
        }
        Err(e) => {
            s.step("generator", None, t, e.1.clone());
            return Err(e);
        }
    };

    let mut sql = gen.sql;
    let mut model = gen.model;
    let mut origin = super::CandidateOrigin::Generated;
    let mut rounds = 0u32;
    let rows = loop {
        let (stage, error) = match try_candidate(s, deps, &sql, &model, origin) {
            Ok(rows) => break rows,
            Err(e) => e,
        };
        if rounds >= cfg.max_repair_rounds {
            let msg = if cfg.max_repair_rounds == 0 {
                error
            } else {
                format!("repair rounds exhausted ({}); last error: {error}", cfg.max_repair_rounds)
            };
            return Err((stage, msg, false));
        }
        rounds += 1;
        let t = Instant::now();
        match repair(&query, &sql, &error, deps.schema, deps.agents) {
            Ok(g) => {
                s.step("repairer", Some(g.model.clone()), t, format!("round {rounds}"));
                sql = g.sql;
                model = g.model;
                origin = super::CandidateOrigin::Repaired;
            }
            Err(e) => {
                s.step("repairer", None, t, e.to_string());
                return Err((Stage::Repair, e.to_string(), e.is_transport()));
            }
        }
    };

    let final_sql = s.final_sql().unwrap_or_default().to_string();
    s.result_fingerprint = Some(rows.fingerprint());
    s.result_preview = Some(RowSet {
        columns: rows.columns.clone(),
        rows: rows.rows.iter().take(cfg.preview_rows).cloned().collect(),
        truncated: rows.truncated || rows.len() > cfg.preview_rows,
    });
    s.result = Some(rows);
    let rows = s.result.as_ref().expect("just set");

    let t = Instant::now();
    let intent = routed.intent;
    let validation = validate_result(&query, intent, &final_sql, rows, cfg.preview_rows, deps.agents);
    let validation = match validation {
        Ok(v) => v,
        Err(e) => {
            s.step("validator", None, t, e.to_string());
            return Err((Stage::Validate, e.to_string(), e.is_transport()));
        }
    };
    s.step("validator", validation.model.clone(), t, if validation.aligned { "aligned" } else { "mismatch" });
    let aligned = validation.aligned;
    let reason = validation.reason.clone();
    s.validation = Some(validation);
    if !aligned {
        return Err((Stage::Validate, format!("mismatch: {reason}"), false));
    }

    let t = Instant::now();
    let summary = summarize(s, intent, deps).map_err(|m| (Stage::Summarize, m, false));
    match summary {
        Ok((summary, model)) => {
            s.step("summarizer", model, t, "summary ready");
            s.summary = Some(summary);
            Ok(())
        }
        Err(e) => {
            s.step("summarizer", None, t, e.1.clone());
            Err(e)
        }
    }
}

/// Safety check then execution of one candidate, recorded in the session.
fn try_candidate(
    s: &mut QuerySession,
    deps: &SessionDeps<'_>,
    sql: &str,
    model: &str,
    origin: super::CandidateOrigin,
) -> Result<RowSet, (Stage, String)> {
    let t = Instant::now();
    let verdict = safety_check(sql);
    s.step("safety", None, t, if verdict.allowed { "allowed".to_string() } else { verdict.reason() });
    let mut cand = SqlCandidate { sql: sql.to_string(), origin, model: model.to_string(), verdict, execution: None };
    let approved = match approve(sql) {
        Ok(a) => a,
        Err(_) => {
            let reason = format!("denied by safety check: {}", cand.verdict.reason());
            s.sql_candidates.push(cand);
            return Err((Stage::Safety, reason));
        }
    };
    let t = Instant::now();
    let out = deps.executor.execute(&approved, &deps.config.limits);
    let elapsed_ms = ms(t);
    let (result, outcome) = match out {
        Ok(rows) => {
            let o = ExecutionOutcome {
                ok: true,
                error: None,
                rows: Some(rows.len()),
                truncated: rows.truncated,
                elapsed_ms,
            };
            (Ok(rows), o)
        }
        Err(e) => {
            let msg = e.to_string();
            let o = ExecutionOutcome { ok: false, error: Some(msg.clone()), rows: None, truncated: false, elapsed_ms };
            (Err((Stage::Execute, msg)), o)
        }
    };
    s.steps.push(Step {
        agent: "executor".into(),
        model: None,
        elapsed_ms,
        outcome: outcome.error.clone().unwrap_or_else(|| format!("{} rows", outcome.rows.unwrap_or(0))),
    });
    cand.execution = Some(outcome);
    s.sql_candidates.push(cand);
    result
}

fn summarize(s: &QuerySession, intent: Intent, deps: &SessionDeps<'_>) -> Result<(Summary, Option<String>), String> {
    let rows = s.result.as_ref().ok_or("no result")?;
    let (note, model) = summary_note(s, rows, deps);
    match intent {
        Intent::Aggregate => {
            let value = rows.scalar().cloned().ok_or("aggregate result is not a single value")?;
            Ok((Summary::Number { value, note }, model))
        }
        Intent::Detail => {
            let dir = &deps.config.export_dir;
            std::fs::create_dir_all(dir).map_err(|e| format!("export directory {}: {e}", dir.display()))?;
            let export_id = uuid::Uuid::new_v4().to_string();
            let path = dir.join(format!("{export_id}.csv"));
            let lines = export_csv_file(rows, &path).map_err(|e| format!("export failed: {e}"))?;
            Ok((Summary::Export { export_id, rows: rows.len(), lines, truncated: rows.truncated, note }, model))
        }
        Intent::Unsupported => Err("unsupported intent".into()),
    }
}

// A one-line description from the summarizer. Optional: failures only
// leave the note out.
fn summary_note(s: &QuerySession, rows: &RowSet, deps: &SessionDeps<'_>) -> (Option<String>, Option<String>) {
    let preview = s.result_preview.as_ref().unwrap_or(rows);
    let body = format!(
        "Question: {}\nColumns: {}\nRows: {}\nFirst rows: {}",
        s.user_query,
        preview.columns.join(", "),
        rows.len(),
        serde_json::to_string(&preview.rows).unwrap_or_default()
    );
    let msgs = vec![Message::system(deps.agents.templates.summarizer.trim()), Message::user(body)];
    match deps.agents.call(Role::Summarizer, msgs, &s.user_query) {
        Ok(r) if !r.text.trim().is_empty() => (Some(r.text.trim().to_string()), Some(r.model)),
        Ok(r) => (None, Some(r.model)),
        Err(e) => {
            tracing::debug!(error = %e, "summary note skipped");
            (None, None)
        }
    }
}

fn write_audit(s: &mut QuerySession, sink: &dyn AuditSink) {
    s.audit_entry_id = Some(s.id.clone());
    let entry = AuditEntry {
        session_id: s.id.clone(),
        created_at: s.created_at.clone(),
        question: s.user_query.clone(),
        intent: s.intent.map(|i| i.as_str().to_string()),
        status: match s.status {
            SessionStatus::Succeeded => "succeeded".into(),
            SessionStatus::Failed => "failed".into(),
        },
        final_sql: s.final_sql().map(str::to_string),
        trace: serde_json::to_value(&*s).unwrap_or(serde_json::Value::Null),
    };
    if let Err(e) = sink.append(&entry) {
        tracing::error!(session = %s.id, error = %e, "audit append failed");
        s.audit_entry_id = None;
        s.audit_error = Some(e);
    }
}
