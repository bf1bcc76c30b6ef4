use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use matkb::exemplar::{generate_suite, Tier};
use matkb::knowledgebase::KnowledgeBase;
use matkb::llm::{Reply, Role, ScriptFile};
use serde_json::{json, Value};

fn matkb(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_matkb")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn score_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    let rec = |m: &str, v: &str| {
        json!({"kind": "performance", "doi_or_title": "d", "material_name": m, "parameter": "density", "value": v})
            .to_string()
    };
    let gold = dir.path().join("gold.ndjson");
    let pred = dir.path().join("pred.ndjson");
    std::fs::write(&gold, format!("{}\n{}\n", rec("PbPc", "1.91 g/cm ³"), rec("WS2", "7.5 g/cm3"))).unwrap();
    std::fs::write(&pred, format!("{}\n\n", rec("PbPc", "1.91 g/cm ³"))).unwrap();
    let out = matkb(&["score", p(&gold), p(&pred)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tp"], 1);
    assert_eq!(report["fn"], 1);
    assert_eq!(report["precision"], 1.0);
    assert_eq!(report["recall"], 0.5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("precision"));
}

#[test]
fn ingest_extract_load_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let txt = dir.path().join("pbpc.txt");
    std::fs::write(&txt, "Lead phthalocyanine films were grown. The PbPc density was 1.91 g/cm ³.").unwrap();
    let docs = dir.path().join("docs");
    matkb(&["ingest", p(&txt), "--out", p(&docs), "--doi", "https://doi.org/10.1000/PbPc"]);
    let doc_file = std::fs::read_dir(&docs).unwrap().next().unwrap().unwrap().path();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&doc_file).unwrap()).unwrap();
    assert_eq!(doc["doi"], "10.1000/pbpc");
    assert_eq!(doc["sentences"].as_array().unwrap().len(), 2);

    let reply = json!({
        "title": null, "doi": null, "synthesis": [],
        "performance": [{"material_name": "PbPc", "parameter": "density", "value": "1.91 g/cm ³", "sentences": [1]}]
    });
    let script = ScriptFile {
        default: BTreeMap::from([(Role::Extractor, Reply::One(reply.to_string()))]),
        by_subject: BTreeMap::new(),
    };
    let script_path = dir.path().join("script.json");
    std::fs::write(&script_path, serde_json::to_string(&script).unwrap()).unwrap();
    let results = dir.path().join("results");
    let out = matkb(&["extract", p(&doc_file), "--mock", p(&script_path), "--out", p(&results)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("failure rate 0.0000"));
    let result_file = std::fs::read_dir(&results).unwrap().next().unwrap().unwrap().path();

    let db = dir.path().join("kb.sqlite");
    let url = format!("sqlite://{}", db.display());
    matkb(&["load", p(&result_file), "--db", &url]);
    // loading the same result again only deduplicates
    let out = matkb(&["load", p(&result_file), "--db", &url]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 inserted, 1 duplicates"));
    let kb = KnowledgeBase::open(&db).unwrap();
    let value: String = kb
        .connection()
        .query_row("SELECT value FROM performance_records WHERE material_name = 'PbPc'", [], |r| r.get(0))
        .unwrap();
    assert_eq!(value, "1.91 g/cm ³");
}

#[test]
fn bench_with_scripted_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("kb.sqlite");
    matkb(&["load", "--db", p(&db), "--sample"]);
    let suite = generate_suite(KnowledgeBase::open(&db).unwrap().connection(), 20).unwrap();
    let suite_path = dir.path().join("suite.json");
    suite.save(&suite_path).unwrap();

    let mut script = ScriptFile::default();
    script.default.insert(Role::Validator, Reply::One(r#"{"aligned": true, "reason": "ok"}"#.into()));
    for q in &suite.questions {
        let intent = if q.tier == Tier::Simple { "aggregate" } else { "detail" };
        let replies = script.by_subject.entry(q.question.clone()).or_default();
        replies.insert(Role::Router, Reply::One(intent.into()));
        replies.insert(Role::Generator, Reply::One(q.oracle_sql.clone()));
    }
    let script_path = dir.path().join("script.json");
    std::fs::write(&script_path, serde_json::to_string(&script).unwrap()).unwrap();

    let out = matkb(&["bench", "--suite", p(&suite_path), "--db", p(&db), "--mock", p(&script_path)]);
    let text = String::from_utf8_lossy(&out.stdout);
    for tier in ["Simple", "Medium", "Complex"] {
        assert!(text.contains(&format!("{tier}: 20/20 (1.000)")), "{text}");
    }
}
