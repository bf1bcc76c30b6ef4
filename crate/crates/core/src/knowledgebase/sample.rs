use std::collections::BTreeMap;

use crate::corpus::normalize_doi;
use crate::extraction::{ExtractionResult, ExtractionStatus, Provenance};
use crate::records::{PerformanceRecord, SynthesisRecord};

/// Published sample performance rows (tab-separated, with header).
pub const SAMPLE_PERFORMANCE_TSV: &str = include_str!("../../data/sample_performance.tsv");
/// Published sample synthesis rows (tab-separated, with header).
pub const SAMPLE_SYNTHESIS_TSV: &str = include_str!("../../data/sample_synthesis.tsv");

fn rows(tsv: &str, width: usize) -> impl Iterator<Item = Vec<&str>> {
    tsv.lines().skip(1).filter(|l| !l.trim().is_empty()).map(move |l| {
        let cells: Vec<&str> = l.split('\t').collect();
        assert_eq!(cells.len(), width, "bad sample row: {l}");
        cells
    })
}

/// The sample rows grouped per article, as successful extraction results.
pub fn sample_results() -> Vec<ExtractionResult> {
    fn entry<'a>(by_article: &'a mut BTreeMap<String, ExtractionResult>, key: &str) -> &'a mut ExtractionResult {
        by_article.entry(key.to_string()).or_insert_with(|| {
            let doi = normalize_doi(key);
            ExtractionResult {
                document_id: format!("sample:{key}"),
                title: doi.is_none().then(|| key.to_string()),
                doi,
                performance: Vec::new(),
                synthesis: Vec::new(),
                provenance: Provenance::default(),
                attempt_count: 0,
                status: ExtractionStatus::Success,
                confidence: None,
                error: None,
                template_version: "sample".into(),
            }
        })
    }
    let mut by_article: BTreeMap<String, ExtractionResult> = BTreeMap::new();
    for c in rows(SAMPLE_PERFORMANCE_TSV, 4) {
        let r = entry(&mut by_article, c[0]);
        r.performance.push(PerformanceRecord {
            doi_or_title: c[0].into(),
            material_name: c[1].into(),
            parameter: c[2].into(),
            value: c[3].into(),
        });
        r.provenance.performance.push(Vec::new());
    }
    for c in rows(SAMPLE_SYNTHESIS_TSV, 7) {
        let r = entry(&mut by_article, c[0]);
        r.synthesis.push(SynthesisRecord {
            doi_or_title: c[0].into(),
            material_name: c[1].into(),
            method_name: c[2].into(),
            method_details: c[3].into(),
            reagents: c[4].into(),
            conditions: c[5].into(),
            equipment: c[6].into(),
        });
        r.provenance.synthesis.push(Vec::new());
    }
    by_article.into_values().collect()
}
