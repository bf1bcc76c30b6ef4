use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rusqlite::{Connection, ErrorCode};
use serde::{Deserialize, Serialize};

use super::ApprovedSql;
use crate::knowledgebase::{KbError, KnowledgeBase, RowSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub row_cap: usize,
    pub statement_timeout_ms: u64,
    /// Extra attempts after a busy/locked error.
    pub transient_retries: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Self { row_cap: 10_000, statement_timeout_ms: 30_000, transient_retries: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("statement exceeded {ms} ms")]
    Timeout { ms: u64 },
    /// Backend message, unmodified, for the repair loop.
    #[error("{0}")]
    Backend(String),
    #[error("statement is not read-only")]
    NotReadOnly,
    #[error("database busy after {attempts} attempts: {message}")]
    Busy { attempts: u32, message: String },
}

impl ExecError {
    pub fn is_transient(&self) -> bool {
        matches!(self, ExecError::Busy { .. })
    }
}

/// Runs approved SQL. Taking [`ApprovedSql`] means nothing unchecked can
/// reach an implementation.
pub trait Executor: Send + Sync {
    fn execute(&self, sql: &ApprovedSql, limits: &Limits) -> Result<RowSet, ExecError>;
}

impl<T: Executor + ?Sized> Executor for Arc<T> {
    fn execute(&self, sql: &ApprovedSql, limits: &Limits) -> Result<RowSet, ExecError> {
        (**self).execute(sql, limits)
    }
}

/// Executor over a read-only SQLite connection. Statements the engine does
/// not report as read-only are refused before stepping.
pub struct SqliteExecutor {
    conn: Mutex<Connection>,
    deadline_hit: Arc<AtomicBool>,
}

impl SqliteExecutor {
    pub fn new(kb: &KnowledgeBase) -> Result<Self, KbError> {
        Ok(Self::from_connection(kb.read_only()?))
    }

    /// Wraps a connection the caller has already made read-only.
    pub fn from_connection(conn: Connection) -> Self {
        Self { conn: Mutex::new(conn), deadline_hit: Arc::new(AtomicBool::new(false)) }
    }

    fn run_once(&self, conn: &Connection, sql: &str, limits: &Limits) -> Result<RowSet, ExecError> {
        let deadline = Instant::now() + Duration::from_millis(limits.statement_timeout_ms);
        let hit = Arc::clone(&self.deadline_hit);
        hit.store(false, Ordering::SeqCst);
        conn.progress_handler(
            1000,
            Some(move || {
                let over = Instant::now() >= deadline;
                if over {
                    hit.store(true, Ordering::SeqCst);
                }
                over
            }),
        )
        .map_err(backend)?;
        let out = (|| {
            let mut stmt = conn.prepare(sql).map_err(backend)?;
            if !stmt.readonly() {
                return Err(ExecError::NotReadOnly);
            }
            RowSet::from_statement(&mut stmt, limits.row_cap).map_err(backend)
        })();
        let _ = conn.progress_handler(0, None::<fn() -> bool>);
        match out {
            Err(_) if self.deadline_hit.load(Ordering::SeqCst) => {
                Err(ExecError::Timeout { ms: limits.statement_timeout_ms })
            }
            other => other,
        }
    }
}

fn backend(e: rusqlite::Error) -> ExecError {
    if let rusqlite::Error::SqliteFailure(f, msg) = &e {
        if matches!(f.code, ErrorCode::DatabaseBusy | ErrorCode::DatabaseLocked) {
            return ExecError::Busy { attempts: 1, message: msg.clone().unwrap_or_else(|| e.to_string()) };
        }
    }
    match e {
        rusqlite::Error::SqliteFailure(_, Some(msg)) => ExecError::Backend(msg),
        other => ExecError::Backend(other.to_string()),
    }
}

impl Executor for SqliteExecutor {
    fn execute(&self, sql: &ApprovedSql, limits: &Limits) -> Result<RowSet, ExecError> {
        let conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.run_once(&conn, sql.as_str(), limits) {
                Err(ExecError::Busy { message, .. }) => {
                    if attempt > limits.transient_retries {
                        return Err(ExecError::Busy { attempts: attempt, message });
                    }
                    tracing::warn!(attempt, %message, "database busy, retrying");
                    std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
                }
                other => return other,
            }
        }
    }
}
