use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use sqlparser::ast::{Expr, ObjectNamePart, TableFactor, Visit, Visitor};
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::Parser;

use crate::agentflow::SchemaInfo;

/// `table.column` names a statement reads, resolved against `schema`.
/// Qualified references go through table aliases; a bare column is
/// attributed to every referenced table that has it. Names that resolve to
/// nothing in the schema (CTE columns, aliases of expressions) are dropped.
pub fn extract_key_fields(sql: &str, schema: &SchemaInfo) -> Vec<String> {
    let Ok(statements) = Parser::parse_sql(&SQLiteDialect {}, sql) else {
        return Vec::new();
    };
    let mut c = Collector::default();
    let _ = statements.visit(&mut c);

    let mut out = BTreeSet::new();
    for (qualifier, column) in &c.columns {
        match qualifier {
            Some(q) => {
                let table = c.aliases.get(q).cloned().unwrap_or_else(|| q.clone());
                if schema.has_column(&table, column) {
                    out.insert(format!("{table}.{column}"));
                }
            }
            None => {
                for table in &c.tables {
                    if schema.has_column(table, column) {
                        out.insert(format!("{table}.{column}"));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

#[derive(Default)]
struct Collector {
    // alias (lowercase) -> table (lowercase)
    aliases: BTreeMap<String, String>,
    tables: BTreeSet<String>,
    columns: BTreeSet<(Option<String>, String)>,
}

fn last_ident(parts: &[ObjectNamePart]) -> Option<String> {
    match parts.last()? {
        ObjectNamePart::Identifier(i) => Some(i.value.to_lowercase()),
        _ => None,
    }
}

impl Visitor for Collector {
    type Break = ();

    fn pre_visit_table_factor(&mut self, t: &TableFactor) -> ControlFlow<()> {
        if let TableFactor::Table { name, alias, .. } = t {
            if let Some(table) = last_ident(&name.0) {
                if let Some(a) = alias {
                    self.aliases.insert(a.name.value.to_lowercase(), table.clone());
                }
                self.tables.insert(table);
            }
        }
        ControlFlow::Continue(())
    }

    fn pre_visit_expr(&mut self, e: &Expr) -> ControlFlow<()> {
        match e {
            Expr::Identifier(i) => {
                self.columns.insert((None, i.value.to_lowercase()));
            }
            Expr::CompoundIdentifier(parts) if parts.len() >= 2 => {
                let n = parts.len();
                self.columns.insert((Some(parts[n - 2].value.to_lowercase()), parts[n - 1].value.to_lowercase()));
            }
            _ => {}
        }
        ControlFlow::Continue(())
    }
}
