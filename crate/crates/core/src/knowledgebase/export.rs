use std::io::Write;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, Statement};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::KbError;

/// One result value. Blobs are rendered as lowercase hex text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn from_ref(v: ValueRef<'_>) -> Cell {
        match v {
            ValueRef::Null => Cell::Null,
            ValueRef::Integer(i) => Cell::Integer(i),
            ValueRef::Real(f) => Cell::Real(f),
            ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Cell::Text(hex::encode(b)),
        }
    }

    pub fn as_text(&self) -> String {
        match self {
            Cell::Null => String::new(),
            Cell::Integer(i) => i.to_string(),
            Cell::Real(f) => f.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Integer(i) => Some(*i as f64),
            Cell::Real(f) => Some(*f),
            Cell::Text(s) => s.trim().parse().ok(),
            Cell::Null => None,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.as_text())
    }
}

/// A query result with named columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// More rows existed than were kept.
    #[serde(default)]
    pub truncated: bool,
}

impl RowSet {
    /// Runs `sql` and keeps at most `cap` rows.
    pub fn collect(conn: &Connection, sql: &str, cap: usize) -> rusqlite::Result<RowSet> {
        let mut stmt = conn.prepare(sql)?;
        Self::from_statement(&mut stmt, cap)
    }

    /// Steps a prepared statement, keeping at most `cap` rows.
    pub fn from_statement(stmt: &mut Statement<'_>, cap: usize) -> rusqlite::Result<RowSet> {
        let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
        let width = columns.len();
        let mut rows = Vec::new();
        let mut truncated = false;
        let mut cursor = stmt.query([])?;
        while let Some(row) = cursor.next()? {
            if rows.len() == cap {
                truncated = true;
                break;
            }
            rows.push((0..width).map(|i| row.get_ref(i).map(Cell::from_ref)).collect::<Result<_, _>>()?);
        }
        Ok(RowSet { columns, rows, truncated })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The single value of a one-row, one-column result.
    pub fn scalar(&self) -> Option<&Cell> {
        match (self.columns.len(), self.rows.as_slice()) {
            (1, [row]) => row.first(),
            _ => None,
        }
    }

    /// SHA-256 over column names and cell text, with row and column counts.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update(c.as_bytes());
            h.update([0x1f]);
        }
        h.update([0x1e]);
        for row in &self.rows {
            for cell in row {
                // type tag keeps 1 and '1' apart
                let tag: u8 = match cell {
                    Cell::Null => 0,
                    Cell::Integer(_) => 1,
                    Cell::Real(_) => 2,
                    Cell::Text(_) => 3,
                };
                h.update([tag]);
                h.update(cell.as_text().as_bytes());
                h.update([0x1f]);
            }
            h.update([0x1e]);
        }
        Fingerprint { sha256: hex::encode(h.finalize()), rows: self.rows.len(), cols: self.columns.len() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// Identity of a result: content hash plus shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub sha256: String,
    pub rows: usize,
    pub cols: usize,
}

const BOM: &[u8] = b"\xEF\xBB\xBF";

/// Writes `rows` as spreadsheet-friendly CSV: UTF-8 with a byte-order mark,
/// a header row, CRLF line ends and RFC 4180 quoting. Returns the number of
/// lines written, header included.
pub fn export_csv<W: Write>(rows: &RowSet, mut out: W) -> Result<usize, KbError> {
    if rows.columns.is_empty() {
        return Err(KbError::Export("result has no columns".into()));
    }
    out.write_all(BOM)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);
    let csv_err = |e: csv::Error| KbError::Export(e.to_string());
    w.write_record(&rows.columns).map_err(csv_err)?;
    for row in &rows.rows {
        w.write_record(row.iter().map(Cell::as_text)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(rows.rows.len() + 1)
}

pub fn export_csv_file(rows: &RowSet, path: &Path) -> Result<usize, KbError> {
    let file = std::fs::File::create(path)?;
    export_csv(rows, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(columns: &[&str], rows: Vec<Vec<Cell>>) -> RowSet {
        RowSet { columns: columns.iter().map(|c| c.to_string()).collect(), rows, truncated: false }
    }

    #[test]
    fn one_row_two_columns() {
        let mut buf = Vec::new();
        let n = export_csv(&set(&["a", "b"], vec![vec![Cell::Integer(1), Cell::Text("x".into())]]), &mut buf).unwrap();
        assert_eq!(n, 2);
        assert_eq!(buf, b"\xEF\xBB\xBFa,b\r\n1,x\r\n");
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let mut buf = Vec::new();
        export_csv(&set(&["v"], vec![vec![Cell::Text("a, \"b\"".into())]]), &mut buf).unwrap();
        assert_eq!(&buf[3..], b"v\r\n\"a, \"\"b\"\"\"\r\n");
    }

    #[test]
    fn zero_columns_is_an_error() {
        assert!(matches!(export_csv(&RowSet::default(), Vec::new()), Err(KbError::Export(_))));
    }
}
