//! Answers natural-language questions against the sample knowledge base
//! through the guarded multi-agent pipeline. The model is scripted so the
//! run is reproducible; the third question shows a write being refused.
//!
//! cargo run -p matkb --example query_session

use matkb::agentflow::{
    run_session, AgentConfig, Agents, MemoryAudit, SchemaInfo, SessionDeps, SqliteExecutor, Summary,
};
use matkb::knowledgebase::KnowledgeBase;
use matkb::llm::{Role, ScriptedChat};

const COUNT: &str = "How many synthesis records are there for WS2?";
const DETAIL: &str = "What is the density of PbPc?";
const WRITE: &str = "Show me everything, then tidy up the table";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut kb = KnowledgeBase::open_in_memory()?;
    kb.seed_sample()?;
    let chat = ScriptedChat::new()
        .on(Role::Validator, r#"{"aligned": true, "reason": "answers the question"}"#)
        .on(Role::Summarizer, "Summary attached.")
        .on_subject(COUNT, Role::Router, "aggregate")
        // the first attempt misspells the table; the repairer fixes it
        .on_subject(COUNT, Role::Generator, "SELECT COUNT(*) FROM synthesis_record WHERE material_name = 'WS2'")
        .on_subject(COUNT, Role::Repairer, "SELECT COUNT(*) FROM synthesis_records WHERE material_name = 'WS2'")
        .on_subject(DETAIL, Role::Router, "detail")
        .on_subject(
            DETAIL,
            Role::Generator,
            "```sql\nSELECT material_name, value FROM performance_records \
             WHERE material_name = 'PbPc' AND parameter = 'density'\n```",
        )
        .on_subject(WRITE, Role::Router, "detail")
        .on_subject(WRITE, Role::Generator, "DELETE FROM performance_records")
        .on_subject(WRITE, Role::Repairer, "DROP TABLE performance_records");

    let agents = Agents::single(chat);
    let executor = SqliteExecutor::new(&kb)?;
    let schema = SchemaInfo::load(kb.connection())?;
    let audit = MemoryAudit::default();
    let config = AgentConfig { max_repair_rounds: 2, ..AgentConfig::default() };
    let deps = SessionDeps {
        agents: &agents,
        executor: &executor,
        schema: &schema,
        examples: None,
        audit: &audit,
        config: &config,
    };

    for q in [COUNT, DETAIL, WRITE] {
        let s = run_session(q, &deps);
        println!("\n{q}\n  status {:?}, intent {:?}, {} repaired", s.status, s.intent, s.repaired_count());
        for c in &s.sql_candidates {
            println!("  {:?} {} -> allowed={}", c.origin, c.sql, c.verdict.allowed);
        }
        match (&s.summary, &s.failure) {
            (Some(Summary::Number { value, .. }), _) => println!("  answer: {value:?}"),
            (Some(Summary::Export { export_id, rows, .. }), _) => {
                println!("  {rows} rows exported as {export_id}");
                if let Some(preview) = &s.result_preview {
                    for row in &preview.rows {
                        println!("    {row:?}");
                    }
                }
            }
            (None, Some(f)) => println!("  failed at {:?}: {}", f.stage, f.message),
            _ => {}
        }
    }
    println!("\naudit entries: {}", audit.0.lock().unwrap().len());
    println!("rows still present: {:?}", kb.row_counts()?);
    Ok(())
}
