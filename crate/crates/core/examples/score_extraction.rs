//! Scores a model's records against a hand-labelled set.
//!
//! cargo run -p matkb --example score_extraction

use matkb::evalkit::{ngram_jaccard, ratio_similarity, score_records, SimilarityWeights, DEFAULT_THRESHOLD};
use matkb::records::{PerformanceRecord, Record};

fn perf(material: &str, parameter: &str, value: &str) -> Record {
    Record::Performance(PerformanceRecord {
        doi_or_title: "10.1000/demo".into(),
        material_name: material.into(),
        parameter: parameter.into(),
        value: value.into(),
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("ratio(density, densities) = {:.3}", ratio_similarity("density", "densities"));
    println!("bigram jaccard(MoS2, MoSe2) = {:.3}", ngram_jaccard("MoS2", "MoSe2", 2)?);

    let gold = vec![
        perf("PbPc", "density", "1.91 g/cm ³"),
        perf("MoS2", "band gap", "1.8 eV"),
        perf("WS2", "band gap", "2.0 eV"),
    ];
    // one near-miss, one merged fact, one hallucination
    let pred = vec![
        perf("PbPc", "Density", "1.91 g/cm3"),
        perf("MoS2, WS2", "band gap", "1.8 eV and 2.0 eV"),
        perf("graphene", "mobility", "200000 cm2/Vs"),
    ];
    let report = score_records(&gold, &pred, DEFAULT_THRESHOLD, &SimilarityWeights::default())?;
    for ((g, p), s) in report.matching.iter().zip(&report.similarities) {
        println!("gold {g} <-> pred {p}  similarity {s:.3}");
    }
    println!(
        "tp={} fp={} fn={}  precision={:.3} recall={:.3} f1={:.3}",
        report.tp, report.fp, report.fn_, report.precision, report.recall, report.f1
    );
    Ok(())
}
