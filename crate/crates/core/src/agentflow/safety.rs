//! Parser-based gate admitting only single read-only SELECT statements.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use sqlparser::ast::{Expr, ObjectNamePart, Query, Select, SetExpr, Statement, Visit, Visitor};
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::Parser;
use sqlparser::tokenizer::{Token, Tokenizer};

/// Outcome of [`safety_check`]. A denial always names the rule and the
/// offending fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub allowed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<String>,
}

impl SafetyVerdict {
    fn allow() -> Self {
        Self { allowed: true, rule: None, fragment: None }
    }

    fn deny(rule: &str, fragment: impl Into<String>) -> Self {
        let mut fragment: String = fragment.into();
        if fragment.chars().count() > 120 {
            fragment = fragment.chars().take(117).collect::<String>() + "...";
        }
        Self { allowed: false, rule: Some(rule.to_string()), fragment: Some(fragment) }
    }

    /// `rule: fragment` for denials, empty for approvals.
    pub fn reason(&self) -> String {
        match (&self.rule, &self.fragment) {
            (Some(r), Some(f)) => format!("{r}: {f}"),
            (Some(r), None) => r.clone(),
            _ => String::new(),
        }
    }
}

/// SQL text that passed [`safety_check`]. Only this module can build one,
/// so executors taking `&ApprovedSql` cannot receive unchecked text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApprovedSql(String);

impl ApprovedSql {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ApprovedSql {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Runs [`safety_check`] and wraps approved text.
pub fn approve(sql: &str) -> Result<ApprovedSql, SafetyVerdict> {
    let verdict = safety_check(sql);
    if verdict.allowed {
        Ok(ApprovedSql(sql.to_string()))
    } else {
        Err(verdict)
    }
}

/// SQLite functions with side effects outside the query result.
pub const DENIED_FUNCTIONS: [&str; 7] =
    ["load_extension", "readfile", "writefile", "edit", "fts3_tokenizer", "zipfile", "sqlar_compress"];

// Debug names of statement variants that modify data, schema or privileges.
const WRITE_VARIANTS: [&str; 20] = [
    "Insert", "Update", "Delete", "Merge", "Drop", "Truncate", "Alter", "Create", "Grant", "Revoke", "Deny", "Copy",
    "Load", "Unload", "Vacuum", "Rename", "Undrop", "Attach", "Detach", "Replace",
];

/// Classifies `sql`. Allowed: exactly one top-level query statement
/// (`SELECT`, `WITH ... SELECT`, set operations, `VALUES`) with no
/// data-modifying subquery, `SELECT INTO`, row-locking clause, file-output
/// clause or side-effecting function. Everything else, including text that
/// does not parse, is denied.
pub fn safety_check(sql: &str) -> SafetyVerdict {
    let dialect = SQLiteDialect {};
    let tokens = match Tokenizer::new(&dialect, sql).tokenize() {
        Ok(t) => t,
        Err(e) => return SafetyVerdict::deny("parse-error", e.to_string()),
    };
    let words: Vec<&str> = tokens
        .iter()
        .filter_map(|t| match t {
            Token::Word(w) if w.quote_style.is_none() => Some(w.value.as_str()),
            _ => None,
        })
        .collect();
    if words.is_empty() && !tokens.iter().any(|t| !matches!(t, Token::Whitespace(_) | Token::SemiColon)) {
        return SafetyVerdict::deny("empty", "no statement");
    }
    if let Some(w) = words.iter().find(|w| w.eq_ignore_ascii_case("outfile") || w.eq_ignore_ascii_case("dumpfile")) {
        return SafetyVerdict::deny("into-outfile", format!("INTO {}", w.to_uppercase()));
    }
    let statements = match Parser::parse_sql(&dialect, sql) {
        Ok(s) => s,
        Err(e) => return SafetyVerdict::deny("parse-error", e.to_string()),
    };
    match statements.as_slice() {
        [] => SafetyVerdict::deny("empty", "no statement"),
        [single] => check_statement(single),
        [_, second, ..] => {
            SafetyVerdict::deny("multi-statement", format!("{} statements; second: {second}", statements.len()))
        }
    }
}

fn variant_name(s: &Statement) -> String {
    format!("{s:?}").chars().take_while(|c| c.is_alphanumeric()).collect()
}

fn check_statement(stmt: &Statement) -> SafetyVerdict {
    let Statement::Query(query) = stmt else {
        let name = variant_name(stmt);
        let rule =
            if WRITE_VARIANTS.iter().any(|w| name.starts_with(w)) { "write-statement" } else { "non-select-statement" };
        return SafetyVerdict::deny(rule, stmt.to_string());
    };
    let mut guard = Guard;
    match query.visit(&mut guard) {
        ControlFlow::Break(v) => v,
        ControlFlow::Continue(()) => SafetyVerdict::allow(),
    }
}

struct Guard;

impl Visitor for Guard {
    type Break = SafetyVerdict;

    fn pre_visit_query(&mut self, q: &Query) -> ControlFlow<SafetyVerdict> {
        if let Some(lock) = q.locks.first() {
            return ControlFlow::Break(SafetyVerdict::deny("locking-clause", lock.to_string()));
        }
        if let SetExpr::Insert(s) | SetExpr::Update(s) | SetExpr::Delete(s) | SetExpr::Merge(s) = q.body.as_ref() {
            return ControlFlow::Break(SafetyVerdict::deny("nested-write", s.to_string()));
        }
        ControlFlow::Continue(())
    }

    fn pre_visit_select(&mut self, s: &Select) -> ControlFlow<SafetyVerdict> {
        if let Some(into) = &s.into {
            return ControlFlow::Break(SafetyVerdict::deny("select-into", into.to_string()));
        }
        ControlFlow::Continue(())
    }

    fn pre_visit_statement(&mut self, s: &Statement) -> ControlFlow<SafetyVerdict> {
        if matches!(s, Statement::Query(_)) {
            return ControlFlow::Continue(());
        }
        ControlFlow::Break(SafetyVerdict::deny("nested-write", s.to_string()))
    }

    fn pre_visit_expr(&mut self, e: &Expr) -> ControlFlow<SafetyVerdict> {
        if let Expr::Function(f) = e {
            if let Some(ObjectNamePart::Identifier(last)) = f.name.0.last() {
                let name = last.value.to_lowercase();
                if DENIED_FUNCTIONS.contains(&name.as_str()) {
                    return ControlFlow::Break(SafetyVerdict::deny("denied-function", f.to_string()));
                }
            }
        }
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(sql: &str) -> Option<String> {
        safety_check(sql).rule
    }

    #[test]
    fn basic_verdicts() {
        assert!(safety_check("SELECT COUNT(*) FROM performance_records").allowed);
        assert_eq!(rule("DELETE FROM articles").as_deref(), Some("write-statement"));
        assert_eq!(rule("SELECT 1; DROP TABLE articles").as_deref(), Some("multi-statement"));
        assert!(safety_check("SELECT * FROM t WHERE note = 'delete me'").allowed);
        assert!(safety_check("SELECT 1;").allowed);
        assert_eq!(rule("").as_deref(), Some("empty"));
        assert_eq!(rule("  -- nothing\n").as_deref(), Some("empty"));
        assert_eq!(rule("SELEC 1").as_deref(), Some("parse-error"));
        assert_eq!(rule("PRAGMA foreign_keys = 0").as_deref(), Some("non-select-statement"));
        assert_eq!(rule("SELECT load_extension('x')").as_deref(), Some("denied-function"));
    }

    #[test]
    fn denial_has_reason() {
        let v = safety_check("DROP TABLE articles");
        assert!(!v.allowed);
        assert!(v.reason().starts_with("write-statement: DROP TABLE"));
        assert!(approve("DROP TABLE articles").is_err());
        assert_eq!(approve("SELECT 1").unwrap().as_str(), "SELECT 1");
    }
}
