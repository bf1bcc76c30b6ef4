//! Relational store for curated records, learned query examples and the
//! query audit trail. SQLite is the embedded backend; the DDL sticks to
//! `TEXT`/`INTEGER` columns so it ports to server engines unchanged.

mod audit;
mod curation;
mod export;
mod sample;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rusqlite::{params, Connection, OpenFlags, OptionalExtension, TransactionBehavior};

pub use audit::AuditEntry;
pub use curation::{CurationPolicy, RejectReason};
pub use export::{export_csv, export_csv_file, Cell, Fingerprint, RowSet};
pub use sample::{sample_results, SAMPLE_PERFORMANCE_TSV, SAMPLE_SYNTHESIS_TSV};

use crate::corpus::{normalize_doi, WorkMetadata};
use crate::evalkit::normalize_text;
use crate::extraction::ExtractionResult;
use crate::records::{PerformanceRecord, SynthesisRecord};

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
    #[error("table {table}: column {column} {detail}")]
    Migration { table: String, column: String, detail: String },
    #[error("invalid curation policy: {0}")]
    Policy(String),
    #[error("export failed: {0}")]
    Export(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Tables holding knowledge, as opposed to bookkeeping.
pub const DATA_TABLES: [&str; 4] = ["articles", "performance_records", "synthesis_records", "query_examples"];

pub const ALL_TABLES: [&str; 5] =
    ["articles", "performance_records", "synthesis_records", "query_examples", "audit_log"];

// (table, [(column, declared type)])
const EXPECTED: [(&str, &[(&str, &str)]); 5] = [
    (
        "articles",
        &[
            ("id", "INTEGER"),
            ("doi_or_title", "TEXT"),
            ("title", "TEXT"),
            ("doi", "TEXT"),
            ("year", "INTEGER"),
            ("venue", "TEXT"),
        ],
    ),
    (
        "performance_records",
        &[
            ("id", "INTEGER"),
            ("doi_or_title", "TEXT"),
            ("material_name", "TEXT"),
            ("parameter", "TEXT"),
            ("value", "TEXT"),
            ("dedup_key", "TEXT"),
        ],
    ),
    (
        "synthesis_records",
        &[
            ("id", "INTEGER"),
            ("doi_or_title", "TEXT"),
            ("material_name", "TEXT"),
            ("method_name", "TEXT"),
            ("method_details", "TEXT"),
            ("reagents", "TEXT"),
            ("conditions", "TEXT"),
            ("equipment", "TEXT"),
            ("dedup_key", "TEXT"),
        ],
    ),
    (
        "query_examples",
        &[
            ("id", "INTEGER"),
            ("query_text", "TEXT"),
            ("normalized_query", "TEXT"),
            ("key_fields", "TEXT"),
            ("sql", "TEXT"),
            ("result_fingerprint", "TEXT"),
            ("source", "TEXT"),
            ("created_at", "TEXT"),
        ],
    ),
    (
        "audit_log",
        &[
            ("id", "INTEGER"),
            ("session_id", "TEXT"),
            ("created_at", "TEXT"),
            ("question", "TEXT"),
            ("intent", "TEXT"),
            ("status", "TEXT"),
            ("final_sql", "TEXT"),
            ("trace", "TEXT"),
        ],
    ),
];

const DDL: &str = "
CREATE TABLE IF NOT EXISTS articles (
    id INTEGER PRIMARY KEY,
    doi_or_title TEXT NOT NULL UNIQUE,
    title TEXT,
    doi TEXT,
    year INTEGER,
    venue TEXT
);
CREATE TABLE IF NOT EXISTS performance_records (
    id INTEGER PRIMARY KEY,
    doi_or_title TEXT NOT NULL REFERENCES articles(doi_or_title),
    material_name TEXT NOT NULL,
    parameter TEXT NOT NULL,
    value TEXT NOT NULL,
    dedup_key TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS synthesis_records (
    id INTEGER PRIMARY KEY,
    doi_or_title TEXT NOT NULL REFERENCES articles(doi_or_title),
    material_name TEXT NOT NULL,
    method_name TEXT NOT NULL,
    method_details TEXT NOT NULL,
    reagents TEXT NOT NULL,
    conditions TEXT NOT NULL,
    equipment TEXT NOT NULL,
    dedup_key TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS query_examples (
    id INTEGER PRIMARY KEY,
    query_text TEXT NOT NULL,
    normalized_query TEXT NOT NULL,
    key_fields TEXT NOT NULL,
    sql TEXT NOT NULL,
    result_fingerprint TEXT,
    source TEXT NOT NULL,
    created_at TEXT NOT NULL,
    UNIQUE (normalized_query, sql)
);
CREATE TABLE IF NOT EXISTS audit_log (
    id INTEGER PRIMARY KEY,
    session_id TEXT NOT NULL UNIQUE,
    created_at TEXT NOT NULL,
    question TEXT NOT NULL,
    intent TEXT,
    status TEXT NOT NULL,
    final_sql TEXT,
    trace TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_articles_doi ON articles(doi);
CREATE INDEX IF NOT EXISTS idx_performance_article ON performance_records(doi_or_title);
CREATE INDEX IF NOT EXISTS idx_performance_material ON performance_records(material_name);
CREATE INDEX IF NOT EXISTS idx_performance_parameter ON performance_records(parameter);
CREATE INDEX IF NOT EXISTS idx_synthesis_article ON synthesis_records(doi_or_title);
CREATE INDEX IF NOT EXISTS idx_synthesis_material ON synthesis_records(material_name);
CREATE INDEX IF NOT EXISTS idx_synthesis_method ON synthesis_records(method_name);
";

/// Creates missing tables and indexes, then checks that every expected
/// column exists with its declared type. Safe to call repeatedly.
pub fn init_schema(conn: &Connection) -> Result<(), KbError> {
    check_columns(conn)?;
    conn.execute_batch(DDL)?;
    check_columns(conn)
}

fn check_columns(conn: &Connection) -> Result<(), KbError> {
    for (table, columns) in EXPECTED {
        let mut stmt = conn.prepare(&format!("PRAGMA table_info({table})"))?;
        let found: BTreeMap<String, String> = stmt
            .query_map([], |row| Ok((row.get::<_, String>(1)?, row.get::<_, String>(2)?)))?
            .collect::<Result<_, _>>()?;
        if found.is_empty() {
            continue;
        }
        for (column, ty) in columns {
            match found.get(*column) {
                None => {
                    return Err(KbError::Migration {
                        table: table.into(),
                        column: column.to_string(),
                        detail: "is missing".into(),
                    })
                }
                Some(actual) if !actual.eq_ignore_ascii_case(ty) => {
                    return Err(KbError::Migration {
                        table: table.into(),
                        column: column.to_string(),
                        detail: format!("has type {actual}, expected {ty}"),
                    })
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Outcome of one [`KnowledgeBase::upsert_result`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct UpsertCounts {
    pub inserted: usize,
    pub deduplicated: usize,
    pub rejected: usize,
}

impl std::ops::AddAssign for UpsertCounts {
    fn add_assign(&mut self, o: Self) {
        self.inserted += o.inserted;
        self.deduplicated += o.deduplicated;
        self.rejected += o.rejected;
    }
}

pub fn performance_dedup_key(r: &PerformanceRecord) -> String {
    dedup_key(&[&r.doi_or_title, &r.material_name, &r.parameter, &r.value])
}

pub fn synthesis_dedup_key(r: &SynthesisRecord) -> String {
    dedup_key(&[&r.doi_or_title, &r.material_name, &r.method_name])
}

fn dedup_key(parts: &[&str]) -> String {
    parts.iter().map(|p| normalize_text(p)).collect::<Vec<_>>().join("\u{1f}")
}

/// A knowledge-base database: one read-write connection plus the location
/// needed to open read-only ones.
pub struct KnowledgeBase {
    conn: Connection,
    location: Location,
}

#[derive(Debug, Clone)]
enum Location {
    File(PathBuf),
    // shared-cache in-memory database, alive while `conn` is open
    Memory(String),
}

const BUSY_TIMEOUT: Duration = Duration::from_secs(5);

impl KnowledgeBase {
    /// Opens (creating if needed) a database file and initializes the schema.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let path = path.as_ref().to_path_buf();
        let conn = Connection::open(&path)?;
        Self::setup(conn, Location::File(path))
    }

    /// A private in-memory database that read-only handles can still reach.
    pub fn open_in_memory() -> Result<Self, KbError> {
        let uri = format!("file:matkb-{}?mode=memory&cache=shared", uuid::Uuid::new_v4());
        let flags = OpenFlags::SQLITE_OPEN_READ_WRITE | OpenFlags::SQLITE_OPEN_CREATE | OpenFlags::SQLITE_OPEN_URI;
        let conn = Connection::open_with_flags(&uri, flags)?;
        Self::setup(conn, Location::Memory(uri))
    }

    fn setup(conn: Connection, location: Location) -> Result<Self, KbError> {
        conn.busy_timeout(BUSY_TIMEOUT)?;
        conn.pragma_update(None, "foreign_keys", true)?;
        init_schema(&conn)?;
        Ok(Self { conn, location })
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.location {
            Location::File(p) => Some(p),
            Location::Memory(_) => None,
        }
    }

    /// A new connection that cannot modify the database: opened read-only
    /// and with `query_only` set.
    pub fn read_only(&self) -> Result<Connection, KbError> {
        let conn = match &self.location {
            Location::File(p) => {
                Connection::open_with_flags(p, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)?
            }
            Location::Memory(uri) => Connection::open_with_flags(
                uri,
                OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_URI | OpenFlags::SQLITE_OPEN_NO_MUTEX,
            )?,
        };
        conn.busy_timeout(BUSY_TIMEOUT)?;
        conn.pragma_update(None, "query_only", true)?;
        Ok(conn)
    }

    /// Another read-write handle on the same database.
    pub fn reopen(&self) -> Result<Self, KbError> {
        let conn = match &self.location {
            Location::File(p) => Connection::open(p)?,
            Location::Memory(uri) => {
                Connection::open_with_flags(uri, OpenFlags::SQLITE_OPEN_READ_WRITE | OpenFlags::SQLITE_OPEN_URI)?
            }
        };
        Self::setup(conn, self.location.clone())
    }

    /// Inserts or enriches an article row from bibliographic metadata.
    pub fn upsert_article(&self, meta: &WorkMetadata) -> Result<(), KbError> {
        self.conn.execute(
            "INSERT INTO articles (doi_or_title, title, doi, year, venue) VALUES (?1, ?2, ?1, ?3, ?4)
             ON CONFLICT(doi_or_title) DO UPDATE SET
               title = COALESCE(excluded.title, articles.title),
               doi = COALESCE(excluded.doi, articles.doi),
               year = COALESCE(excluded.year, articles.year),
               venue = COALESCE(excluded.venue, articles.venue)",
            params![meta.doi, (!meta.title.is_empty()).then_some(&meta.title), meta.year, meta.venue],
        )?;
        Ok(())
    }

    /// Stores the records of `result` that pass `policy`, skipping ones whose
    /// dedup key is already present. Runs in one transaction.
    pub fn upsert_result(
        &mut self,
        result: &ExtractionResult,
        policy: &CurationPolicy,
    ) -> Result<UpsertCounts, KbError> {
        let gate = policy.compile()?;
        let mut counts = UpsertCounts::default();
        let tx = self.conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let whole_result_rejected = gate.check_confidence(result.confidence);
        for rec in &result.performance {
            let verdict = whole_result_rejected.clone().or_else(|| gate.check_performance(rec));
            if let Some(reason) = verdict {
                tracing::info!(document = %result.document_id, material = %rec.material_name, %reason, "record rejected");
                counts.rejected += 1;
                continue;
            }
            ensure_article(&tx, &rec.doi_or_title, result)?;
            let n = tx.execute(
                "INSERT INTO performance_records (doi_or_title, material_name, parameter, value, dedup_key)
                 VALUES (?1, ?2, ?3, ?4, ?5) ON CONFLICT(dedup_key) DO NOTHING",
                params![rec.doi_or_title, rec.material_name, rec.parameter, rec.value, performance_dedup_key(rec)],
            )?;
            if n == 1 {
                counts.inserted += 1;
            } else {
                counts.deduplicated += 1;
            }
        }
        for rec in &result.synthesis {
            let verdict = whole_result_rejected.clone().or_else(|| gate.check_synthesis(rec));
            if let Some(reason) = verdict {
                tracing::info!(document = %result.document_id, material = %rec.material_name, %reason, "record rejected");
                counts.rejected += 1;
                continue;
            }
            ensure_article(&tx, &rec.doi_or_title, result)?;
            let n = tx.execute(
                "INSERT INTO synthesis_records (doi_or_title, material_name, method_name, method_details,
                     reagents, conditions, equipment, dedup_key)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8) ON CONFLICT(dedup_key) DO NOTHING",
                params![
                    rec.doi_or_title,
                    rec.material_name,
                    rec.method_name,
                    rec.method_details,
                    rec.reagents,
                    rec.conditions,
                    rec.equipment,
                    synthesis_dedup_key(rec)
                ],
            )?;
            if n == 1 {
                counts.inserted += 1;
            } else {
                counts.deduplicated += 1;
            }
        }
        tx.commit()?;
        Ok(counts)
    }

    /// Loads the bundled sample rows.
    pub fn seed_sample(&mut self) -> Result<UpsertCounts, KbError> {
        let mut total = UpsertCounts::default();
        let policy = CurationPolicy::default();
        for r in sample_results() {
            total += self.upsert_result(&r, &policy)?;
        }
        Ok(total)
    }

    /// Row count per table in [`DATA_TABLES`].
    pub fn row_counts(&self) -> Result<BTreeMap<String, i64>, KbError> {
        let mut out = BTreeMap::new();
        for table in DATA_TABLES {
            let n: i64 = self.conn.query_row(&format!("SELECT COUNT(*) FROM {table}"), [], |r| r.get(0))?;
            out.insert(table.to_string(), n);
        }
        Ok(out)
    }

    /// Runs a read query with no row cap. For tooling and tests; agent
    /// queries go through the guarded executor instead.
    pub fn query(&self, sql: &str) -> Result<RowSet, KbError> {
        Ok(RowSet::collect(&self.conn, sql, usize::MAX)?)
    }

    pub fn append_audit(&self, entry: &AuditEntry) -> Result<(), KbError> {
        audit::append(&self.conn, entry)
    }

    /// Most recent entries first.
    pub fn recent_audit(&self, limit: usize) -> Result<Vec<AuditEntry>, KbError> {
        audit::recent(&self.conn, limit)
    }

    pub fn audit_entry(&self, session_id: &str) -> Result<Option<AuditEntry>, KbError> {
        audit::by_session(&self.conn, session_id)
    }

    pub fn audit_count(&self) -> Result<i64, KbError> {
        Ok(self.conn.query_row("SELECT COUNT(*) FROM audit_log", [], |r| r.get(0))?)
    }
}

fn ensure_article(conn: &Connection, key: &str, result: &ExtractionResult) -> Result<(), KbError> {
    let exists: Option<i64> =
        conn.query_row("SELECT id FROM articles WHERE doi_or_title = ?1", [key], |r| r.get(0)).optional()?;
    if exists.is_some() {
        return Ok(());
    }
    let doi = normalize_doi(key);
    let names_this_result = Some(key) == result.doi.as_deref() || Some(key) == result.title.as_deref();
    let title =
        if names_this_result { result.title.clone() } else { None }.or_else(|| doi.is_none().then(|| key.to_string()));
    let doi = doi.or_else(|| if names_this_result { result.doi.clone() } else { None });
    conn.execute("INSERT INTO articles (doi_or_title, title, doi) VALUES (?1, ?2, ?3)", params![key, title, doi])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_database_has_five_tables_and_indexes() {
        let kb = KnowledgeBase::open_in_memory().unwrap();
        let names: Vec<String> = kb
            .connection()
            .prepare("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")
            .unwrap()
            .query_map([], |r| r.get(0))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        let mut expected: Vec<&str> = ALL_TABLES.to_vec();
        expected.sort();
        assert_eq!(names, expected);
        let idx: i64 = kb
            .connection()
            .query_row(
                "SELECT COUNT(*) FROM sqlite_master WHERE type = 'index' AND name LIKE 'idx_performance_%'",
                [],
                |r| r.get(0),
            )
            .unwrap();
        assert_eq!(idx, 3);
        init_schema(kb.connection()).unwrap();
    }

    #[test]
    fn conflicting_column_type_is_named() {
        let conn = Connection::open_in_memory().unwrap();
        conn.execute_batch("CREATE TABLE performance_records (id INTEGER PRIMARY KEY, doi_or_title TEXT, material_name TEXT, parameter TEXT, value REAL, dedup_key TEXT)").unwrap();
        match init_schema(&conn) {
            Err(KbError::Migration { table, column, .. }) => {
                assert_eq!((table.as_str(), column.as_str()), ("performance_records", "value"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn read_only_handle_refuses_writes() {
        let kb = KnowledgeBase::open_in_memory().unwrap();
        let ro = kb.read_only().unwrap();
        assert!(ro.execute("DELETE FROM articles", []).is_err());
        assert!(ro.execute_batch("CREATE TABLE x (a TEXT)").is_err());
    }
}
