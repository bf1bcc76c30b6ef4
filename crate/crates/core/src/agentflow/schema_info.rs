use std::fmt::Write;

use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::knowledgebase::{KbError, DATA_TABLES};

// internal bookkeeping columns the generator should not see
const HIDDEN: [&str; 1] = ["dedup_key"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableInfo {
    pub name: String,
    pub columns: Vec<ColumnInfo>,
}

/// Tables and columns exposed to SQL-writing agents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaInfo {
    pub tables: Vec<TableInfo>,
}

impl SchemaInfo {
    pub fn load(conn: &Connection) -> Result<Self, KbError> {
        let mut tables = Vec::new();
        for table in DATA_TABLES {
            let mut stmt = conn.prepare(&format!("PRAGMA table_info({table})"))?;
            let columns = stmt
                .query_map([], |r| Ok(ColumnInfo { name: r.get(1)?, ty: r.get(2)? }))?
                .filter(|c| c.as_ref().map_or(true, |c| !HIDDEN.contains(&c.name.as_str())))
                .collect::<Result<Vec<_>, _>>()?;
            tables.push(TableInfo { name: table.to_string(), columns });
        }
        Ok(Self { tables })
    }

    pub fn table(&self, name: &str) -> Option<&TableInfo> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.table(table).is_some_and(|t| t.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)))
    }

    /// One line per table: `name(col TYPE, ...)`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            let cols: Vec<String> = t.columns.iter().map(|c| format!("{} {}", c.name, c.ty)).collect();
            let _ = writeln!(out, "{}({})", t.name, cols.join(", "));
        }
        out
    }
}
