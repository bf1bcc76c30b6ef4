//! A seeded knowledge base wired up for query sessions.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Mutex;

use matkb::agentflow::{
    safety_check, AgentConfig, Agents, ApprovedSql, ExecError, Executor, Limits, SchemaInfo, SessionDeps,
    SqliteExecutor,
};
use matkb::knowledgebase::{KnowledgeBase, RowSet};

/// Records every statement that reaches the database and fails the test
/// if one was not approved.
pub struct Interceptor {
    inner: SqliteExecutor,
    pub seen: Mutex<Vec<String>>,
}

impl Interceptor {
    pub fn new(kb: &KnowledgeBase) -> Self {
        Self { inner: SqliteExecutor::new(kb).unwrap(), seen: Mutex::new(Vec::new()) }
    }

    pub fn seen(&self) -> Vec<String> {
        self.seen.lock().unwrap().clone()
    }
}

impl Executor for Interceptor {
    fn execute(&self, sql: &ApprovedSql, limits: &Limits) -> Result<RowSet, ExecError> {
        assert!(safety_check(sql.as_str()).allowed, "unapproved SQL reached the database: {sql}");
        self.seen.lock().unwrap().push(sql.to_string());
        self.inner.execute(sql, limits)
    }
}

pub struct Harness {
    pub kb: Mutex<KnowledgeBase>,
    pub exec: Interceptor,
    pub schema: SchemaInfo,
    pub config: AgentConfig,
    pub dir: tempfile::TempDir,
}

impl Harness {
    pub fn seeded() -> Self {
        let mut kb = KnowledgeBase::open_in_memory().unwrap();
        kb.seed_sample().unwrap();
        Self::with_kb(kb)
    }

    pub fn with_kb(kb: KnowledgeBase) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let exec = Interceptor::new(&kb);
        let schema = SchemaInfo::load(kb.connection()).unwrap();
        let config = AgentConfig { export_dir: dir.path().join("exports"), ..AgentConfig::default() };
        Self { kb: Mutex::new(kb), exec, schema, config, dir }
    }

    pub fn deps<'a>(&'a self, agents: &'a Agents) -> SessionDeps<'a> {
        SessionDeps {
            agents,
            executor: &self.exec,
            schema: &self.schema,
            examples: Some(&self.kb),
            audit: &self.kb,
            config: &self.config,
        }
    }

    pub fn counts(&self) -> BTreeMap<String, i64> {
        self.kb.lock().unwrap().row_counts().unwrap()
    }

    pub fn audit_count(&self) -> i64 {
        self.kb.lock().unwrap().audit_count().unwrap()
    }

    /// Direct query outside the agent path.
    pub fn direct(&self, sql: &str) -> RowSet {
        self.kb.lock().unwrap().query(sql).unwrap()
    }
}
