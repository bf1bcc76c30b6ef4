//! Loads the bundled sample tables, shows deduplication and curation, and
//! exports a query result as CSV.
//!
//! cargo run -p matkb --example knowledge_base [-- out.csv]

use matkb::knowledgebase::{export_csv, sample_results, CurationPolicy, KnowledgeBase, UpsertCounts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut kb = KnowledgeBase::open_in_memory()?;
    let first = kb.seed_sample()?;
    println!("seeded: {} inserted, {} rejected", first.inserted, first.rejected);

    // Same facts again: nothing new is stored.
    let policy = CurationPolicy::default();
    let mut again = UpsertCounts::default();
    for r in sample_results() {
        again += kb.upsert_result(&r, &policy)?;
    }
    println!("reloaded: {} inserted, {} duplicates", again.inserted, again.deduplicated);
    for (table, n) in kb.row_counts()? {
        println!("  {table}: {n}");
    }

    let rows = kb.query(
        "SELECT material_name, parameter, value FROM performance_records \
         WHERE material_name = 'PbPc' ORDER BY id",
    )?;
    match std::env::args().nth(1) {
        Some(path) => {
            let n = matkb::knowledgebase::export_csv_file(&rows, std::path::Path::new(&path))?;
            println!("wrote {n} rows to {path}");
        }
        None => {
            export_csv(&rows, std::io::stdout().lock())?;
        }
    }
    Ok(())
}
