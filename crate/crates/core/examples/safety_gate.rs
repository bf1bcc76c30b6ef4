//! Classifies SQL as read-only or not before anything touches the database.
//!
//! cargo run -p matkb --example safety_gate [-- "SQL ..."]

use matkb::agentflow::{approve, safety_check};

fn main() {
    let mut statements: Vec<String> = std::env::args().skip(1).collect();
    if statements.is_empty() {
        statements = [
            "SELECT material_name, value FROM performance_records WHERE parameter = 'band gap'",
            "WITH t AS (SELECT 1 AS x) SELECT x FROM t",
            "DELETE FROM performance_records",
            "SELECT 1; DROP TABLE articles",
            "PRAGMA writable_schema = 1",
            "SELECT load_extension('evil.so')",
            "ATTACH DATABASE '/tmp/x.db' AS x",
        ]
        .map(String::from)
        .to_vec();
    }
    for sql in &statements {
        let v = safety_check(sql);
        if v.allowed {
            println!("ALLOW {sql}");
        } else {
            println!("DENY  {sql}\n      {}", v.reason());
        }
        // Only an approved statement can be handed to an executor.
        assert_eq!(approve(sql).is_ok(), v.allowed);
    }
}
