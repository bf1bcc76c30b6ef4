use std::collections::BTreeMap;
use std::path::Path;

use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::agentflow::{run_session, SessionDeps};
use crate::knowledgebase::{KbError, RowSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Single-table counts.
    Simple,
    /// Filtered selects answered with an export.
    Medium,
    /// Joins with aggregation, arithmetic and ordering.
    Complex,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Simple, Tier::Medium, Tier::Complex];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkQuestion {
    pub tier: Tier,
    pub question: String,
    /// Run directly against the database to get the expected answer.
    pub oracle_sql: String,
}

/// Questions with oracle SQL. Serialized as a bare JSON list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BenchmarkSuite {
    pub questions: Vec<BenchmarkQuestion>,
}

impl BenchmarkSuite {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).map_err(std::io::Error::other)?)
    }

    pub fn tier(&self, tier: Tier) -> impl Iterator<Item = &BenchmarkQuestion> {
        self.questions.iter().filter(move |q| q.tier == tier)
    }
}

fn lit(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn distinct(conn: &Connection, sql: &str) -> Result<Vec<String>, KbError> {
    let mut stmt = conn.prepare(sql)?;
    let v = stmt.query_map([], |r| r.get::<_, String>(0))?.collect::<Result<_, _>>()?;
    Ok(v)
}

/// Builds up to `per_tier` questions per tier from the values present in
/// the database. Tiers come out in order simple, medium, complex.
pub fn generate_suite(conn: &Connection, per_tier: usize) -> Result<BenchmarkSuite, KbError> {
    let params = distinct(conn, "SELECT DISTINCT parameter FROM performance_records ORDER BY parameter")?;
    let perf_materials =
        distinct(conn, "SELECT DISTINCT material_name FROM performance_records ORDER BY material_name")?;
    let syn_materials = distinct(conn, "SELECT DISTINCT material_name FROM synthesis_records ORDER BY material_name")?;
    let methods = distinct(conn, "SELECT DISTINCT method_name FROM synthesis_records ORDER BY method_name")?;

    let mut simple = vec![
        ("How many performance records are there?".to_string(), "SELECT COUNT(*) FROM performance_records".to_string()),
        ("How many synthesis records are there?".into(), "SELECT COUNT(*) FROM synthesis_records".into()),
        ("How many articles are there?".into(), "SELECT COUNT(*) FROM articles".into()),
    ];
    for p in &params {
        simple.push((
            format!("How many performance records report {p}?"),
            format!("SELECT COUNT(*) FROM performance_records WHERE parameter = {}", lit(p)),
        ));
    }
    for m in &methods {
        simple.push((
            format!("How many synthesis records use {m}?"),
            format!("SELECT COUNT(*) FROM synthesis_records WHERE method_name = {}", lit(m)),
        ));
    }
    for m in &perf_materials {
        simple.push((
            format!("How many performance records are there for {m}?"),
            format!("SELECT COUNT(*) FROM performance_records WHERE material_name = {}", lit(m)),
        ));
    }

    let mut medium = Vec::new();
    for m in &perf_materials {
        medium.push((
            format!("List the performance records for {m}."),
            format!(
                "SELECT doi_or_title, material_name, parameter, value FROM performance_records \
                 WHERE material_name = {} ORDER BY id",
                lit(m)
            ),
        ));
    }
    for p in &params {
        medium.push((
            format!("List the materials and values reported for {p}."),
            format!("SELECT material_name, value FROM performance_records WHERE parameter = {} ORDER BY id", lit(p)),
        ));
    }
    for m in &syn_materials {
        medium.push((
            format!("List the synthesis methods recorded for {m}."),
            format!(
                "SELECT method_name, method_details, reagents, conditions, equipment FROM synthesis_records \
                 WHERE material_name = {} ORDER BY id",
                lit(m)
            ),
        ));
    }

    let mut complex = Vec::new();
    for p in &params {
        complex.push((
            format!(
                "For each article reporting {p}, give the number of {p} records and their share of the \
                 article's performance records in percent, largest share first."
            ),
            format!(
                "SELECT a.doi_or_title, SUM(p.parameter = {l}) AS matching, \
                 ROUND(100.0 * SUM(p.parameter = {l}) / COUNT(*), 2) AS percent \
                 FROM articles a JOIN performance_records p ON p.doi_or_title = a.doi_or_title \
                 GROUP BY a.doi_or_title HAVING SUM(p.parameter = {l}) > 0 \
                 ORDER BY percent DESC, a.doi_or_title",
                l = lit(p)
            ),
        ));
    }
    let mut all_materials: Vec<&String> = perf_materials.iter().chain(&syn_materials).collect();
    all_materials.sort();
    all_materials.dedup();
    for m in all_materials {
        complex.push((
            format!(
                "For the articles mentioning {m}, count their performance and synthesis records and the \
                 total, most records first."
            ),
            format!(
                "SELECT a.doi_or_title, COUNT(DISTINCT p.id) AS performance_count, \
                 COUNT(DISTINCT s.id) AS synthesis_count, COUNT(DISTINCT p.id) + COUNT(DISTINCT s.id) AS total \
                 FROM articles a \
                 LEFT JOIN performance_records p ON p.doi_or_title = a.doi_or_title \
                 LEFT JOIN synthesis_records s ON s.doi_or_title = a.doi_or_title \
                 WHERE a.doi_or_title IN (SELECT doi_or_title FROM performance_records WHERE material_name = {l} \
                 UNION SELECT doi_or_title FROM synthesis_records WHERE material_name = {l}) \
                 GROUP BY a.doi_or_title ORDER BY total DESC, a.doi_or_title",
                l = lit(m)
            ),
        ));
    }

    let mut questions = Vec::new();
    for (tier, list) in [(Tier::Simple, simple), (Tier::Medium, medium), (Tier::Complex, complex)] {
        questions.extend(list.into_iter().take(per_tier).map(|(question, oracle_sql)| BenchmarkQuestion {
            tier,
            question,
            oracle_sql,
        }));
    }
    Ok(BenchmarkSuite { questions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub tier: Tier,
    pub question: String,
    pub correct: bool,
    pub session_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierScore {
    pub correct: usize,
    pub total: usize,
}

impl TierScore {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub tiers: BTreeMap<Tier, TierScore>,
    /// In suite order.
    pub outcomes: Vec<QuestionOutcome>,
}

impl BenchmarkReport {
    pub fn accuracy(&self, tier: Tier) -> f64 {
        self.tiers.get(&tier).map_or(0.0, TierScore::accuracy)
    }
}

/// Runs every question through [`run_session`] and compares with the oracle:
/// a numeric answer must equal a 1x1 oracle value, anything else must have
/// the oracle's row-set fingerprint. Oracles run on `oracle` before any
/// session starts; sessions then run on up to `parallelism` threads.
pub fn run_benchmark(
    suite: &BenchmarkSuite,
    oracle: &Connection,
    deps: &SessionDeps<'_>,
    parallelism: usize,
) -> Result<BenchmarkReport, KbError> {
    let expected: Vec<RowSet> =
        suite.questions.iter().map(|q| RowSet::collect(oracle, &q.oracle_sql, usize::MAX)).collect::<Result<_, _>>()?;
    let workers = parallelism.max(1).min(suite.questions.len().max(1));
    let mut outcomes: Vec<Option<QuestionOutcome>> = vec![None; suite.questions.len()];
    std::thread::scope(|scope| {
        let chunks = outcomes.chunks_mut(suite.questions.len().div_ceil(workers).max(1));
        let mut start = 0;
        for chunk in chunks {
            let offset = start;
            start += chunk.len();
            let expected = &expected;
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let q = &suite.questions[offset + i];
                    *slot = Some(judge(q, &expected[offset + i], deps));
                }
            });
        }
    });
    let outcomes: Vec<QuestionOutcome> = outcomes.into_iter().flatten().collect();
    let mut tiers = BTreeMap::new();
    for o in &outcomes {
        let e = tiers.entry(o.tier).or_insert(TierScore { correct: 0, total: 0 });
        e.total += 1;
        e.correct += usize::from(o.correct);
    }
    Ok(BenchmarkReport { tiers, outcomes })
}

fn judge(q: &BenchmarkQuestion, expected: &RowSet, deps: &SessionDeps<'_>) -> QuestionOutcome {
    let s = run_session(&q.question, deps);
    let reason = if !s.succeeded() {
        Some(s.failure.as_ref().map_or_else(|| "failed".to_string(), |f| f.message.clone()))
    } else {
        let scalar = expected.scalar().and_then(|c| c.as_f64());
        let ok = match (scalar, s.answer()) {
            (Some(want), Some(got)) => got.as_f64() == Some(want),
            _ => s.result_fingerprint.as_ref() == Some(&expected.fingerprint()),
        };
        (!ok).then(|| "answer differs from oracle".to_string())
    };
    QuestionOutcome { tier: q.tier, question: q.question.clone(), correct: reason.is_none(), session_id: s.id, reason }
}
