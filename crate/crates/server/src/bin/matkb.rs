use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use matkb::agentflow::{AgentConfig, Agents, SchemaInfo, SessionDeps, SqliteExecutor};
use matkb::corpus::{ingest_text, DocumentHint};
use matkb::evalkit::{score_records, SimilarityWeights};
use matkb::exemplar::{generate_suite, run_benchmark, BenchmarkSuite, Tier};
use matkb::extraction::{extract_many, failure_rate, ExtractConfig, ExtractionResult};
use matkb::knowledgebase::{CurationPolicy, UpsertCounts};
use matkb::llm::{ChatEndpoint, OpenAiClient, ScriptedChat};
use matkb::records::Record;
use matkb_server::{open_db, ServiceConfig};

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "matkb", version, about = "Materials knowledge base tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match predicted records against gold records (NDJSON files).
    Score {
        gold: PathBuf,
        pred: PathBuf,
        #[arg(long, default_value_t = 0.65)]
        threshold: f64,
        /// JSON similarity weights.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Normalize and segment plain-text articles into document JSON.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// DOI of the article (single input only).
        #[arg(long)]
        doi: Option<String>,
        #[arg(long)]
        title: Option<String>,
    },
    /// Extract records from document JSON files with a chat model.
    Extract {
        #[arg(required = true)]
        docs: Vec<PathBuf>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value = "extractor")]
        model: String,
        #[arg(long)]
        out: PathBuf,
        /// Environment variable holding the bearer token.
        #[arg(long)]
        api_key_env: Option<String>,
        /// Scripted reply file used instead of an endpoint.
        #[arg(long)]
        mock: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Curate extraction results into the database.
    Load {
        results: Vec<PathBuf>,
        #[arg(long)]
        db: String,
        /// JSON curation policy.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Also load the bundled sample tables.
        #[arg(long)]
        sample: bool,
    },
    /// Run a benchmark suite through the query pipeline.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        db: String,
        /// Scripted reply file, or `none` to use the endpoints in --config.
        #[arg(long)]
        mock: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write a generated suite with this many questions per tier first.
        #[arg(long)]
        generate: Option<usize>,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn read_ndjson(path: &Path) -> Result<Vec<Record>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1).into()))
        .collect()
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
    Ok(path)
}

fn score(gold: &Path, pred: &Path, threshold: f64, weights: Option<&Path>) -> Result<()> {
    let w = match weights {
        Some(p) => read_json::<SimilarityWeights>(p)?,
        None => SimilarityWeights::default(),
    };
    let report = score_records(&read_ndjson(gold)?, &read_ndjson(pred)?, threshold, &w)?;
    eprintln!(
        "{:>8} {:>8} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
        "gold", "pred", "tp", "fp", "fn", "precision", "recall", "f1"
    );
    eprintln!(
        "{:>8} {:>8} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}",
        report.gold_count,
        report.pred_count,
        report.tp,
        report.fp,
        report.fn_,
        report.precision,
        report.recall,
        report.f1
    );
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn ingest(paths: &[PathBuf], out: &Path, doi: Option<String>, title: Option<String>) -> Result<()> {
    if paths.len() > 1 && (doi.is_some() || title.is_some()) {
        return Err("--doi and --title apply to a single input".into());
    }
    for p in paths {
        let doc = ingest_text(p, DocumentHint { doi: doi.clone(), title: title.clone() })?;
        let written = write_json(out, &doc.id, &doc)?;
        println!("{} -> {} ({} sentences)", p.display(), written.display(), doc.sentences.len());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn extract_cmd(
    docs: &[PathBuf],
    endpoint: Option<String>,
    model: String,
    out: &Path,
    api_key_env: Option<String>,
    mock: Option<PathBuf>,
    workers: usize,
) -> Result<()> {
    let docs: Vec<matkb::corpus::Document> = docs.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let config = ExtractConfig::default().with_model(model);
    let client: Box<dyn matkb::llm::ChatClient> = match (mock, endpoint) {
        (Some(script), _) => Box::new(ScriptedChat::from_file(&script)?),
        (None, Some(url)) => Box::new(OpenAiClient::new(&ChatEndpoint { base_url: url, api_key_env })?),
        (None, None) => return Err("one of --endpoint or --mock is required".into()),
    };
    let mut results: Vec<ExtractionResult> = Vec::new();
    for (doc, r) in docs.iter().zip(extract_many(&docs, &*client, &config, workers)) {
        match r {
            Ok(r) => {
                write_json(out, &r.document_id, &r)?;
                println!("{}: {:?}, {} records, {} calls", doc.id, r.status, r.record_count(), r.attempt_count);
                results.push(r);
            }
            Err(e) => eprintln!("{}: {e}", doc.id),
        }
    }
    println!("failure rate {:.4}", failure_rate(&results));
    Ok(())
}

fn load(results: &[PathBuf], db: &str, policy: Option<&Path>, sample: bool) -> Result<()> {
    let policy = match policy {
        Some(p) => read_json::<CurationPolicy>(p)?,
        None => CurationPolicy::default(),
    };
    let mut kb = open_db(db)?;
    let mut total = UpsertCounts::default();
    if sample {
        total += kb.seed_sample()?;
    }
    for p in results {
        let r: ExtractionResult = read_json(p)?;
        let c = kb.upsert_result(&r, &policy)?;
        println!("{}: {} inserted, {} duplicates, {} rejected", p.display(), c.inserted, c.deduplicated, c.rejected);
        total += c;
    }
    println!("total: {} inserted, {} duplicates, {} rejected", total.inserted, total.deduplicated, total.rejected);
    for (table, n) in kb.row_counts()? {
        println!("  {table}: {n}");
    }
    Ok(())
}

fn bench(
    suite_path: &Path,
    db: &str,
    mock: &str,
    config: Option<&Path>,
    generate: Option<usize>,
    parallelism: usize,
) -> Result<()> {
    let kb = open_db(db)?;
    let suite = match generate {
        Some(n) => {
            let s = generate_suite(kb.connection(), n)?;
            s.save(suite_path)?;
            s
        }
        None => BenchmarkSuite::load(suite_path)?,
    };
    let (agents, agent_config) = if mock == "none" {
        let cfg = ServiceConfig::load(config.ok_or("--mock none needs --config")?)?;
        (cfg.agents()?, cfg.agent_config())
    } else {
        (Agents::single(ScriptedChat::from_file(Path::new(mock))?), AgentConfig::default())
    };
    let executor = SqliteExecutor::new(&kb)?;
    let schema = SchemaInfo::load(kb.connection())?;
    let oracle = kb.read_only()?;
    let kb = std::sync::Mutex::new(kb);
    let deps = SessionDeps {
        agents: &agents,
        executor: &executor,
        schema: &schema,
        examples: Some(&kb),
        audit: &kb,
        config: &agent_config,
    };
    let report = run_benchmark(&suite, &oracle, &deps, parallelism)?;
    for tier in Tier::ALL {
        if let Some(s) = report.tiers.get(&tier) {
            println!("{tier:?}: {}/{} ({:.3})", s.correct, s.total, s.accuracy());
        }
    }
    for o in report.outcomes.iter().filter(|o| !o.correct) {
        println!("  miss [{:?}] {}: {}", o.tier, o.question, o.reason.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score { gold, pred, threshold, weights } => score(&gold, &pred, threshold, weights.as_deref()),
        Command::Ingest { paths, out, doi, title } => ingest(&paths, &out, doi, title),
        Command::Extract { docs, endpoint, model, out, api_key_env, mock, workers } => {
            extract_cmd(&docs, endpoint, model, &out, api_key_env, mock, workers)
        }
        Command::Load { results, db, policy, sample } => load(&results, &db, policy.as_deref(), sample),
        Command::Bench { suite, db, mock, config, generate, parallelism } => {
            bench(&suite, &db, &mock, config.as_deref(), generate, parallelism)
        }
        Command::Serve { config } => {
            let cfg = ServiceConfig::load(&config)?;
            tokio::runtime::Runtime::new()?.block_on(matkb_server::serve(cfg))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
