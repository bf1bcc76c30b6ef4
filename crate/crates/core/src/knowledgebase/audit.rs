use rusqlite::{params, Connection, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use super::KbError;

/// One answered (or refused) question as recorded in `audit_log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub session_id: String,
    /// RFC 3339 timestamp.
    pub created_at: String,
    pub question: String,
    pub intent: Option<String>,
    pub status: String,
    pub final_sql: Option<String>,
    /// Full session trace as JSON.
    pub trace: serde_json::Value,
}

pub(super) fn append(conn: &Connection, e: &AuditEntry) -> Result<(), KbError> {
    conn.execute(
        "INSERT INTO audit_log (session_id, created_at, question, intent, status, final_sql, trace)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        params![e.session_id, e.created_at, e.question, e.intent, e.status, e.final_sql, e.trace.to_string()],
    )?;
    Ok(())
}

fn from_row(row: &Row<'_>) -> rusqlite::Result<AuditEntry> {
    let trace: String = row.get(6)?;
    Ok(AuditEntry {
        session_id: row.get(0)?,
        created_at: row.get(1)?,
        question: row.get(2)?,
        intent: row.get(3)?,
        status: row.get(4)?,
        final_sql: row.get(5)?,
        trace: serde_json::from_str(&trace).unwrap_or(serde_json::Value::String(trace)),
    })
}

const COLUMNS: &str = "session_id, created_at, question, intent, status, final_sql, trace";

pub(super) fn recent(conn: &Connection, limit: usize) -> Result<Vec<AuditEntry>, KbError> {
    let mut stmt = conn.prepare(&format!("SELECT {COLUMNS} FROM audit_log ORDER BY id DESC LIMIT ?1"))?;
    let rows = stmt.query_map([limit as i64], from_row)?.collect::<Result<_, _>>()?;
    Ok(rows)
}

pub(super) fn by_session(conn: &Connection, session_id: &str) -> Result<Option<AuditEntry>, KbError> {
    let sql = format!("SELECT {COLUMNS} FROM audit_log WHERE session_id = ?1");
    Ok(conn.query_row(&sql, [session_id], from_row).optional()?)
}
