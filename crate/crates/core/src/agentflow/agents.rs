//! The individual agent steps. Each is a plain function over [`Agents`].

use std::fmt::Write;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Agents, SchemaInfo};
use crate::exemplar::ExampleEntry;
use crate::knowledgebase::RowSet;
use crate::llm::{strip_code_fence, LlmError, Message, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    /// Answer is one number.
    Aggregate,
    /// Answer is a row set to download.
    Detail,
    Unsupported,
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Aggregate => "aggregate",
            Intent::Detail => "detail",
            Intent::Unsupported => "unsupported",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentSource {
    /// The write-request guard fired before any model call.
    Guard,
    Model,
    /// Model reply missing or unparseable.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routed {
    pub intent: Intent,
    pub source: IntentSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{role} returned no SQL after {attempts} attempts")]
    EmptyOutput { role: Role, attempts: u32 },
}

impl AgentError {
    pub fn is_transport(&self) -> bool {
        matches!(self, AgentError::Llm(e) if e.is_transport())
    }
}

static WRITE_REQUEST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(?:please\s+|kindly\s+|can\s+you\s+|could\s+you\s+)*(?:delete|drop|remove|truncate|update|insert|add|alter|modify|overwrite|erase|wipe|clear|replace|rename)\b",
    )
    .unwrap()
});

static AGGREGATE_LEAD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(?:how\s+many|how\s+much|count|what\s+is\s+the\s+(?:number|count|total|sum|average|mean|maximum|minimum|max|min)\b)",
    )
    .unwrap()
});

/// Fallback when the router's reply is unusable.
pub fn heuristic_intent(query: &str) -> Intent {
    if AGGREGATE_LEAD.is_match(query) {
        Intent::Aggregate
    } else {
        Intent::Detail
    }
}

/// Accepts `{"intent": "..."}` or a bare intent word.
pub fn parse_intent(reply: &str) -> Option<Intent> {
    let text = strip_code_fence(reply);
    let word = match serde_json::from_str::<serde_json::Value>(text) {
        Ok(v) => v.get("intent")?.as_str()?.to_string(),
        Err(_) => text.trim_matches(|c: char| c == '"' || c == '.' || c.is_whitespace()).to_string(),
    };
    match word.to_ascii_lowercase().as_str() {
        "aggregate" => Some(Intent::Aggregate),
        "detail" => Some(Intent::Detail),
        "unsupported" => Some(Intent::Unsupported),
        _ => None,
    }
}

/// Classifies a question. Requests to change data never reach the model.
pub fn route(query: &str, agents: &Agents) -> Routed {
    if WRITE_REQUEST.is_match(query) {
        return Routed { intent: Intent::Unsupported, source: IntentSource::Guard, model: None, error: None };
    }
    let msgs = vec![Message::system(agents.templates.router.trim()), Message::user(query)];
    match agents.call(Role::Router, msgs, query) {
        Ok(reply) => match parse_intent(&reply.text) {
            Some(intent) => Routed { intent, source: IntentSource::Model, model: Some(reply.model), error: None },
            None => Routed {
                intent: heuristic_intent(query),
                source: IntentSource::Heuristic,
                model: Some(reply.model),
                error: Some(format!("unparseable router reply: {}", reply.text.trim())),
            },
        },
        Err(e) => Routed {
            intent: heuristic_intent(query),
            source: IntentSource::Heuristic,
            model: None,
            error: Some(e.to_string()),
        },
    }
}

static SQL_START: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?im)^\s*(?:select|with)\b").unwrap());

/// Pulls the SQL out of a model reply: takes the first code fence if any,
/// and drops leading prose when a line starting with SELECT or WITH follows
/// it. Anything else is returned trimmed, for the safety gate to judge.
pub fn extract_sql(reply: &str) -> String {
    let fenced = fenced_block(reply).unwrap_or(reply);
    let text = strip_code_fence(fenced);
    let text = match SQL_START.find(text) {
        Some(m) => &text[m.start()..],
        None => text,
    };
    text.trim().to_string()
}

fn fenced_block(reply: &str) -> Option<&str> {
    let start = reply.find("```")?;
    let rest = &reply[start..];
    let end = rest[3..].find("```")? + 6;
    Some(&rest[..end])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub sql: String,
    pub model: String,
}

fn schema_block(schema: &SchemaInfo) -> String {
    format!("Tables:\n{}", schema.render())
}

fn generator_prompt(query: &str, examples: &[ExampleEntry]) -> String {
    let mut user = String::new();
    if !examples.is_empty() {
        user.push_str("Solved examples:\n");
        for e in examples {
            let _ = writeln!(user, "Question: {}\nSQL: {}\n", e.query_text, e.sql);
        }
    }
    let _ = write!(user, "Question: {query}\nSQL:");
    user
}

/// Asks the generator for SQL answering `query`; one retry on empty output.
pub fn generate_sql(
    query: &str,
    schema: &SchemaInfo,
    examples: &[ExampleEntry],
    agents: &Agents,
) -> Result<Generated, AgentError> {
    let system = format!("{}\n\n{}", agents.templates.generator.trim(), schema_block(schema));
    let msgs = vec![Message::system(system), Message::user(generator_prompt(query, examples))];
    for _ in 0..2 {
        let reply = agents.call(Role::Generator, msgs.clone(), query)?;
        let sql = extract_sql(&reply.text);
        if !sql.is_empty() {
            return Ok(Generated { sql, model: reply.model });
        }
    }
    Err(AgentError::EmptyOutput { role: Role::Generator, attempts: 2 })
}

/// Asks the repairer for a corrected statement. The reply is not checked
/// here; it goes back through the safety gate like any candidate.
pub fn repair(
    query: &str,
    failed_sql: &str,
    error: &str,
    schema: &SchemaInfo,
    agents: &Agents,
) -> Result<Generated, AgentError> {
    let system = format!("{}\n\n{}", agents.templates.repairer.trim(), schema_block(schema));
    let user = format!("Question: {query}\nFailed SQL: {failed_sql}\nError: {error}\nCorrected SQL:");
    let reply = agents.call(Role::Repairer, vec![Message::system(system), Message::user(user)], query)?;
    Ok(Generated { sql: extract_sql(&reply.text), model: reply.model })
}

/// Whether a result answers the question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub aligned: bool,
    pub reason: String,
    /// Decided by the shape check alone, without a model call.
    pub structural: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Deserialize)]
struct ValidatorReply {
    aligned: bool,
    #[serde(default)]
    reason: String,
}

pub fn parse_validation(reply: &str) -> Option<(bool, String)> {
    let v: ValidatorReply = serde_json::from_str(strip_code_fence(reply)).ok()?;
    Some((v.aligned, v.reason))
}

fn shape_problem(intent: Intent, rows: &RowSet) -> Option<String> {
    match intent {
        Intent::Aggregate => match rows.scalar() {
            Some(c) if c.as_f64().is_some() => None,
            Some(c) => Some(format!("shape: expected a number, got {c:?}")),
            None => Some(format!("shape: expected 1x1, got {}x{}", rows.len(), rows.columns.len())),
        },
        Intent::Detail if rows.columns.is_empty() => Some("shape: result has no columns".into()),
        Intent::Detail => None,
        Intent::Unsupported => Some("unsupported intent".into()),
    }
}

/// Shape check first; the model is only asked when the shape fits.
pub fn validate_result(
    query: &str,
    intent: Intent,
    sql: &str,
    rows: &RowSet,
    preview_rows: usize,
    agents: &Agents,
) -> Result<Validation, LlmError> {
    if let Some(reason) = shape_problem(intent, rows) {
        return Ok(Validation { aligned: false, reason, structural: true, model: None });
    }
    let mut preview = String::new();
    let _ = writeln!(preview, "{}", rows.columns.join(" | "));
    for row in rows.rows.iter().take(preview_rows) {
        let cells: Vec<String> = row.iter().map(|c| c.as_text()).collect();
        let _ = writeln!(preview, "{}", cells.join(" | "));
    }
    let user = format!(
        "Question: {query}\nIntent: {}\nSQL: {sql}\nResult ({} rows{}):\n{preview}",
        intent.as_str(),
        rows.len(),
        if rows.truncated { ", truncated" } else { "" }
    );
    let reply = agents.call(
        Role::Validator,
        vec![Message::system(agents.templates.validator.trim()), Message::user(user)],
        query,
    )?;
    let (aligned, reason) =
        parse_validation(&reply.text).unwrap_or((false, format!("unparseable validator reply: {}", reply.text.trim())));
    Ok(Validation { aligned, reason, structural: false, model: Some(reply.model) })
}
