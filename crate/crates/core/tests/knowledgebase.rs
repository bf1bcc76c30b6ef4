use matkb::extraction::{ExtractionResult, ExtractionStatus, Provenance};
use matkb::knowledgebase::{export_csv, sample_results, Cell, CurationPolicy, KnowledgeBase, RowSet, UpsertCounts};
use matkb::records::PerformanceRecord;

fn pbpc_result() -> ExtractionResult {
    sample_results().into_iter().find(|r| r.title.as_deref() == Some("Chem. Mater. 2022, 34, 2238–2248")).unwrap()
}

fn result_with(perf: Vec<PerformanceRecord>) -> ExtractionResult {
    ExtractionResult {
        document_id: "d".into(),
        title: Some("T".into()),
        doi: None,
        provenance: Provenance { performance: vec![Vec::new(); perf.len()], synthesis: Vec::new() },
        performance: perf,
        synthesis: Vec::new(),
        attempt_count: 1,
        status: ExtractionStatus::Success,
        confidence: None,
        error: None,
        template_version: String::new(),
    }
}

fn perf(material: &str, value: &str) -> PerformanceRecord {
    PerformanceRecord {
        doi_or_title: "T".into(),
        material_name: material.into(),
        parameter: "band gap".into(),
        value: value.into(),
    }
}

#[test]
fn pbpc_rows_round_trip() {
    let mut kb = KnowledgeBase::open_in_memory().unwrap();
    let r = pbpc_result();
    assert_eq!(r.performance.len(), 6);
    let counts = kb.upsert_result(&r, &CurationPolicy::default()).unwrap();
    assert_eq!(counts, UpsertCounts { inserted: 6, deduplicated: 0, rejected: 0 });
    let rows = kb.query("SELECT value FROM performance_records WHERE parameter = 'density'").unwrap();
    assert_eq!(rows.scalar(), Some(&Cell::Text("1.91 g/cm ³".into())));
    let again = kb.upsert_result(&r, &CurationPolicy::default()).unwrap();
    assert_eq!(again, UpsertCounts { inserted: 0, deduplicated: 6, rejected: 0 });
    assert_eq!(kb.row_counts().unwrap()["performance_records"], 6);
    assert_eq!(kb.row_counts().unwrap()["articles"], 1);
}

#[test]
fn dedup_uses_text_normalization() {
    let mut kb = KnowledgeBase::open_in_memory().unwrap();
    let policy = CurationPolicy::default();
    kb.upsert_result(&result_with(vec![perf("WS2", "2.0 eV")]), &policy).unwrap();
    let c = kb.upsert_result(&result_with(vec![perf("  ws2 ", "2.0   EV")]), &policy).unwrap();
    assert_eq!((c.inserted, c.deduplicated), (0, 1));
}

#[test]
fn policy_gates() {
    let mut kb = KnowledgeBase::open_in_memory().unwrap();
    let policy = CurationPolicy { max_value_chars: 10, ..CurationPolicy::default() };
    let c =
        kb.upsert_result(&result_with(vec![perf("WS2", "2.0 eV"), perf("MoS2", &"9".repeat(11))]), &policy).unwrap();
    assert_eq!(c, UpsertCounts { inserted: 1, deduplicated: 0, rejected: 1 });

    let c = kb.upsert_result(&result_with(vec![perf("unknown", "1 eV"), perf("hBN", "N/A")]), &policy).unwrap();
    assert_eq!(c.rejected, 2);

    let mut scored = result_with(vec![perf("graphene", "0 eV")]);
    scored.confidence = Some(0.4);
    let strict = CurationPolicy { min_confidence: 0.5, ..CurationPolicy::default() };
    assert_eq!(kb.upsert_result(&scored, &strict).unwrap().rejected, 1);
    scored.confidence = Some(0.6);
    assert_eq!(kb.upsert_result(&scored, &strict).unwrap().inserted, 1);

    let bad = CurationPolicy { min_confidence: 1.5, ..CurationPolicy::default() };
    assert!(kb.upsert_result(&scored, &bad).is_err());
}

#[test]
fn records_require_their_article() {
    let kb = KnowledgeBase::open_in_memory().unwrap();
    let err = kb.connection().execute(
        "INSERT INTO performance_records (doi_or_title, material_name, parameter, value, dedup_key)
         VALUES ('ghost', 'm', 'p', 'v', 'k')",
        [],
    );
    assert!(err.is_err());
    let orphans: i64 = kb
        .connection()
        .query_row(
            "SELECT COUNT(*) FROM performance_records p LEFT JOIN articles a ON a.doi_or_title = p.doi_or_title
             WHERE a.id IS NULL",
            [],
            |r| r.get(0),
        )
        .unwrap();
    assert_eq!(orphans, 0);
}

#[test]
fn failed_write_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.sqlite");
    let mut kb = KnowledgeBase::open(&path).unwrap();
    // A trigger that fails on the second row forces a mid-transaction error.
    kb.connection()
        .execute_batch(
            "CREATE TRIGGER boom BEFORE INSERT ON performance_records
             WHEN NEW.material_name = 'MoS2' BEGIN SELECT RAISE(ABORT, 'boom'); END;",
        )
        .unwrap();
    let r = result_with(vec![perf("WS2", "2.0 eV"), perf("MoS2", "1.8 eV")]);
    assert!(kb.upsert_result(&r, &CurationPolicy::default()).is_err());
    let counts = kb.row_counts().unwrap();
    assert_eq!((counts["performance_records"], counts["articles"]), (0, 0));
}

#[test]
fn thousand_row_export_has_thousand_and_one_lines() {
    let rows = RowSet {
        columns: vec!["i".into(), "text".into()],
        rows: (0..1000).map(|i| vec![Cell::Integer(i), Cell::Text(format!("row, \"{i}\"\nnext"))]).collect(),
        truncated: false,
    };
    let mut buf = Vec::new();
    assert_eq!(export_csv(&rows, &mut buf).unwrap(), 1001);
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(&buf[3..]);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 1001);
    assert_eq!(&records[1][1], "row, \"0\"\nnext");
}

#[test]
fn export_preserves_stored_cells() {
    let mut kb = KnowledgeBase::open_in_memory().unwrap();
    kb.seed_sample().unwrap();
    for table in ["performance_records", "synthesis_records"] {
        let rows = kb.query(&format!("SELECT * FROM {table} ORDER BY id")).unwrap();
        assert!(!rows.is_empty());
        let mut buf = Vec::new();
        export_csv(&rows, &mut buf).unwrap();
        assert!(buf.starts_with(b"\xEF\xBB\xBF"));
        let text = std::str::from_utf8(&buf[3..]).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), rows.columns);
        let back: Vec<Vec<String>> =
            reader.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
        let stored: Vec<Vec<String>> = rows.rows.iter().map(|r| r.iter().map(Cell::as_text).collect()).collect();
        assert_eq!(back, stored);
    }
}

#[test]
fn concurrent_upserts_store_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.sqlite");
    KnowledgeBase::open(&path).unwrap();
    let r = pbpc_result();
    let totals: Vec<UpsertCounts> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|_| {
                s.spawn(|| {
                    let mut kb = KnowledgeBase::open(&path).unwrap();
                    kb.upsert_result(&r, &CurationPolicy::default()).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(totals.iter().map(|c| c.inserted).sum::<usize>(), 6);
    assert_eq!(totals.iter().map(|c| c.deduplicated).sum::<usize>(), 42);
    let kb = KnowledgeBase::open(&path).unwrap();
    assert_eq!(kb.row_counts().unwrap()["performance_records"], 6);
}

#[test]
fn sample_seed_covers_both_tables() {
    let mut kb = KnowledgeBase::open_in_memory().unwrap();
    let c = kb.seed_sample().unwrap();
    assert_eq!(c.rejected, 0);
    let rows = kb
        .query(
            "SELECT method_name FROM synthesis_records WHERE doi_or_title = '10.1038/s41598-020-68321-7'
             ORDER BY method_name",
        )
        .unwrap();
    let names: Vec<String> = rows.rows.iter().map(|r| r[0].as_text()).collect();
    assert_eq!(names, vec!["ALD and gas conversion", "CVD synthesis"]);
    let doi: String = kb
        .connection()
        .query_row("SELECT doi FROM articles WHERE doi_or_title = '10.1038/s41598-020-68321-7'", [], |r| r.get(0))
        .unwrap();
    assert_eq!(doi, "10.1038/s41598-020-68321-7");
}
