//! Stores a successful session as a reusable example, retrieves it for a
//! similar question, then runs the generated three-tier benchmark with a
//! scripted model that answers every question with the oracle SQL.
//!
//! cargo run -p matkb --example learn_and_benchmark

use std::sync::Mutex;

use matkb::agentflow::{run_session, AgentConfig, Agents, SchemaInfo, SessionDeps, SqliteExecutor};
use matkb::exemplar::{generate_suite, retrieve_examples, run_benchmark, store_example, LearningMode, Tier};
use matkb::knowledgebase::KnowledgeBase;
use matkb::llm::{Role, ScriptedChat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut kb = KnowledgeBase::open_in_memory()?;
    kb.seed_sample()?;
    let suite = generate_suite(kb.connection(), 20)?;
    let oracle = kb.read_only()?;

    let mut chat = ScriptedChat::new().on(Role::Validator, r#"{"aligned": true, "reason": "ok"}"#);
    for q in &suite.questions {
        let intent = if q.tier == Tier::Simple { "aggregate" } else { "detail" };
        chat = chat.on_subject(&q.question, Role::Router, intent).on_subject(
            &q.question,
            Role::Generator,
            q.oracle_sql.as_str(),
        );
    }
    let agents = Agents::single(chat);
    let executor = SqliteExecutor::new(&kb)?;
    let schema = SchemaInfo::load(kb.connection())?;
    let config =
        AgentConfig { export_dir: std::env::temp_dir().join("matkb-example-exports"), ..AgentConfig::default() };
    let kb = Mutex::new(kb);
    let deps = SessionDeps {
        agents: &agents,
        executor: &executor,
        schema: &schema,
        examples: Some(&kb),
        audit: &kb,
        config: &config,
    };

    // Learn from one question, then look it up by a paraphrase.
    let first = &suite.questions[0];
    let session = run_session(&first.question, &deps);
    let (entry, created) = store_example(&kb.lock().unwrap(), &session, LearningMode::Passive, &schema)?;
    println!("stored example {} (new: {created}) reading {:?}", entry.id, entry.key_fields);
    for hit in retrieve_examples(kb.lock().unwrap().connection(), "how many performance records exist", 3)? {
        println!("  retrieved {:.3} {}", hit.similarity, hit.entry.query_text);
    }

    let report = run_benchmark(&suite, &oracle, &deps, 4)?;
    for tier in Tier::ALL {
        let s = report.tiers[&tier];
        println!("{tier:?}: {}/{} correct ({:.2})", s.correct, s.total, s.accuracy());
    }
    Ok(())
}
