//! Learned question→SQL examples and the tiered accuracy benchmark.
//!
//! In active mode a model judges whether a successful session is worth
//! keeping; in passive mode the user opts in. Stored examples are retrieved
//! by text similarity and shown to the SQL generator.

mod bench;
mod keyfields;

use std::sync::Mutex;

use rusqlite::{params, Connection, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use crate::agentflow::{safety_check, Agents, ExampleSource, QuerySession, SchemaInfo};
use crate::evalkit::{normalize_text, text_similarity, SimilarityWeights};
use crate::knowledgebase::{Fingerprint, KbError, KnowledgeBase};
use crate::llm::{strip_code_fence, Message, Role};

pub use bench::{
    generate_suite, run_benchmark, BenchmarkQuestion, BenchmarkReport, BenchmarkSuite, QuestionOutcome, Tier, TierScore,
};
pub use keyfields::extract_key_fields;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningMode {
    /// The learner model decides.
    Active,
    /// The user decides.
    Passive,
}

impl LearningMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LearningMode::Active => "active",
            LearningMode::Passive => "passive",
        }
    }

    fn parse(s: &str) -> Self {
        if s == "active" {
            LearningMode::Active
        } else {
            LearningMode::Passive
        }
    }
}

/// A stored question with the SQL that answered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleEntry {
    pub id: i64,
    pub query_text: String,
    /// `table.column` names the SQL reads.
    pub key_fields: Vec<String>,
    pub sql: String,
    pub result_fingerprint: Option<Fingerprint>,
    pub mode: LearningMode,
    pub created_at: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ExemplarError {
    #[error("session not eligible: {0}")]
    NotEligible(String),
    #[error("example SQL fails the safety check: {0}")]
    Unsafe(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

impl From<rusqlite::Error> for ExemplarError {
    fn from(e: rusqlite::Error) -> Self {
        ExemplarError::Kb(KbError::Sqlite(e))
    }
}

const COLUMNS: &str = "id, query_text, key_fields, sql, result_fingerprint, source, created_at";

fn from_row(r: &Row<'_>) -> rusqlite::Result<ExampleEntry> {
    let key_fields: String = r.get(2)?;
    let fingerprint: Option<String> = r.get(4)?;
    let mode: String = r.get(5)?;
    Ok(ExampleEntry {
        id: r.get(0)?,
        query_text: r.get(1)?,
        key_fields: serde_json::from_str(&key_fields).unwrap_or_default(),
        sql: r.get(3)?,
        result_fingerprint: fingerprint.and_then(|f| serde_json::from_str(&f).ok()),
        mode: LearningMode::parse(&mode),
        created_at: r.get(6)?,
    })
}

/// All stored examples in insertion order.
pub fn list_examples(conn: &Connection) -> Result<Vec<ExampleEntry>, KbError> {
    let mut stmt = conn.prepare(&format!("SELECT {COLUMNS} FROM query_examples ORDER BY id"))?;
    let rows = stmt.query_map([], from_row)?.collect::<Result<_, _>>()?;
    Ok(rows)
}

fn check_eligible(session: &QuerySession) -> Result<&str, ExemplarError> {
    if !session.succeeded() {
        return Err(ExemplarError::NotEligible("session did not succeed".into()));
    }
    if !session.validation.as_ref().is_some_and(|v| v.aligned) {
        return Err(ExemplarError::NotEligible("result was not validated".into()));
    }
    session.final_sql().ok_or_else(|| ExemplarError::NotEligible("no executed SQL".into()))
}

/// Persists the session's question and SQL. Storing the same normalized
/// question with the same SQL again returns the existing entry; the flag is
/// true when a row was inserted.
pub fn store_example(
    kb: &KnowledgeBase,
    session: &QuerySession,
    mode: LearningMode,
    schema: &SchemaInfo,
) -> Result<(ExampleEntry, bool), ExemplarError> {
    let sql = check_eligible(session)?;
    let verdict = safety_check(sql);
    if !verdict.allowed {
        return Err(ExemplarError::Unsafe(verdict.reason()));
    }
    let normalized = normalize_text(&session.user_query);
    let key_fields = extract_key_fields(sql, schema);
    let fingerprint = session.result_fingerprint.as_ref().map(|f| serde_json::to_string(f).unwrap_or_default());
    let conn = kb.connection();
    let n = conn.execute(
        "INSERT INTO query_examples (query_text, normalized_query, key_fields, sql, result_fingerprint, source, created_at)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7) ON CONFLICT(normalized_query, sql) DO NOTHING",
        params![
            session.user_query,
            normalized,
            serde_json::to_string(&key_fields).unwrap_or_else(|_| "[]".into()),
            sql,
            fingerprint,
            mode.as_str(),
            chrono::Utc::now().to_rfc3339(),
        ],
    )?;
    let entry = conn.query_row(
        &format!("SELECT {COLUMNS} FROM query_examples WHERE normalized_query = ?1 AND sql = ?2"),
        params![normalized, sql],
        from_row,
    )?;
    Ok((entry, n == 1))
}

pub fn example_by_sql(conn: &Connection, sql: &str) -> Result<Option<ExampleEntry>, KbError> {
    Ok(conn
        .query_row(&format!("SELECT {COLUMNS} FROM query_examples WHERE sql = ?1 ORDER BY id LIMIT 1"), [sql], from_row)
        .optional()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub entry: ExampleEntry,
    pub similarity: f64,
}

/// Top `k` examples by text similarity to `query`; equal scores go to the
/// most recently stored. Entries whose SQL no longer passes the safety
/// check are skipped.
pub fn retrieve_examples(conn: &Connection, query: &str, k: usize) -> Result<Vec<ScoredExample>, KbError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let weights = SimilarityWeights::default();
    let mut scored: Vec<ScoredExample> = list_examples(conn)?
        .into_iter()
        .filter(|e| {
            let v = safety_check(&e.sql);
            if !v.allowed {
                tracing::warn!(id = e.id, reason = %v.reason(), "stored example skipped");
            }
            v.allowed
        })
        .map(|entry| ScoredExample { similarity: text_similarity(query, &entry.query_text, &weights), entry })
        .collect();
    scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(b.entry.id.cmp(&a.entry.id)));
    scored.truncate(k);
    Ok(scored)
}

impl ExampleSource for Mutex<KnowledgeBase> {
    fn retrieve(&self, query: &str, k: usize) -> Vec<ExampleEntry> {
        let kb = self.lock().unwrap_or_else(|p| p.into_inner());
        match retrieve_examples(kb.connection(), query, k) {
            Ok(v) => v.into_iter().map(|s| s.entry).collect(),
            Err(e) => {
                tracing::warn!(error = %e, "example retrieval failed");
                Vec::new()
            }
        }
    }
}

/// The learner's decision on a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub store: bool,
    pub rationale: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Deserialize)]
struct LearnerReply {
    store: bool,
    #[serde(default)]
    rationale: String,
}

/// Asks the learner whether to keep a successful session. SQL already in
/// the repository is refused without a model call.
pub fn judge_learning_value(
    session: &QuerySession,
    conn: &Connection,
    agents: &Agents,
) -> Result<Judgement, ExemplarError> {
    let sql = check_eligible(session)?;
    if example_by_sql(conn, sql)?.is_some() {
        return Ok(Judgement { store: false, rationale: "duplicate".into(), model: None });
    }
    let rows = session.result.as_ref().map_or(0, |r| r.len());
    let user = format!("Question: {}\nSQL: {sql}\nResult rows: {rows}", session.user_query);
    let msgs = vec![Message::system(agents.templates.learner.trim()), Message::user(user)];
    Ok(match agents.call(Role::Learner, msgs, &session.user_query) {
        Ok(reply) => match serde_json::from_str::<LearnerReply>(strip_code_fence(&reply.text)) {
            Ok(r) => Judgement { store: r.store, rationale: r.rationale, model: Some(reply.model) },
            Err(_) => Judgement {
                store: false,
                rationale: format!("unparseable learner reply: {}", reply.text.trim()),
                model: Some(reply.model),
            },
        },
        Err(e) => Judgement { store: false, rationale: format!("learner unavailable: {e}"), model: None },
    })
}
