use std::sync::OnceLock;

use regex::Regex;

use super::normalize::normalize_text;
use super::similarity::{numeric_similarity, text_similarity};
use super::{EvalError, SimilarityWeights};
use crate::records::{is_unspecified, Record};

/// Splits `"-76.8 kcal/mol"` into `(-76.8, "kcal/mol")`.
///
/// Only a single leading number followed by digit-free unit text counts;
/// lists, ranges and expressions such as `a = 52 ± 1 Å` return `None`.
pub fn parse_quantity(value: &str) -> Option<(f64, String)> {
    static QUANTITY: OnceLock<Regex> = OnceLock::new();
    let re = QUANTITY
        .get_or_init(|| Regex::new(r"^([+\-\u{2212}]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+\-]?\d+)?)\s*(.*)$").unwrap());
    let text = normalize_text(value);
    let caps = re.captures(&text)?;
    let unit = caps.get(2).map_or("", |m| m.as_str());
    if unit.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    let number = caps[1].replace('\u{2212}', "-").parse::<f64>().ok()?;
    number.is_finite().then(|| (number, unit.to_string()))
}

fn field_similarity(gold: &str, pred: &str, w: &SimilarityWeights) -> f64 {
    match (is_unspecified(gold), is_unspecified(pred)) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    if let (Some((a, ua)), Some((b, ub))) = (parse_quantity(gold), parse_quantity(pred)) {
        if ua == ub {
            return numeric_similarity(a, b).expect("parsed quantities are finite");
        }
    }
    text_similarity(gold, pred, w)
}

/// Weighted mean of per-field similarities of two records of the same kind.
///
/// A field compares numerically when both values are a single number with the
/// same unit text, and as text otherwise. Missing values (empty or "Not
/// specified") score 1 against each other and 0 against anything present.
pub fn record_similarity(gold: &Record, pred: &Record, w: &SimilarityWeights) -> Result<f64, EvalError> {
    if gold.kind() != pred.kind() {
        return Err(EvalError::KindMismatch { gold: gold.kind(), pred: pred.kind() });
    }
    let weights = w.field_weights_for(gold.kind());
    let total: f64 = weights.iter().sum();
    // Accumulated as a deficit from 1 so identical records score exactly 1.
    let deficit: f64 = gold
        .field_values()
        .into_iter()
        .zip(pred.field_values())
        .zip(weights)
        .filter(|(_, fw)| *fw > 0.0)
        .map(|((g, p), fw)| fw * (1.0 - field_similarity(g, p, w)))
        .sum();
    let score = 1.0 - deficit / total;
    Ok(score.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::similarity::{ngram_jaccard, ratio_similarity};
    use crate::records::{PerformanceRecord, SynthesisRecord};

    fn perf(material: &str, parameter: &str, value: &str) -> Record {
        PerformanceRecord {
            doi_or_title: "Chem. Mater. 2022, 34, 2238–2248".into(),
            material_name: material.into(),
            parameter: parameter.into(),
            value: value.into(),
        }
        .into()
    }

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("1.91 g/cm ³"), Some((1.91, "g/cm ³".into())));
        assert_eq!(parse_quantity("-76.8 kcal/mol"), Some((-76.8, "kcal/mol".into())));
        assert_eq!(parse_quantity("\u{2212}47.6 kcal/mol"), Some((-47.6, "kcal/mol".into())));
        assert_eq!(parse_quantity("537"), Some((537.0, String::new())));
        assert_eq!(parse_quantity("1.91 g/cm3"), None);
        assert_eq!(parse_quantity("a = 52 ± 1 Å"), None);
        assert_eq!(parse_quantity("342.5, 327.1 F g ⁻¹"), None);
        assert_eq!(parse_quantity("NO2 sensor measurements"), None);
    }

    #[test]
    fn identical_records_score_one() {
        let r = perf("PbPc", "density", "1.91 g/cm ³");
        assert_eq!(record_similarity(&r, &r, &SimilarityWeights::default()).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_records_score_zero() {
        let a = Record::Performance(PerformanceRecord {
            doi_or_title: "aaaa".into(),
            material_name: "bbbb".into(),
            parameter: "cccc".into(),
            value: "dddd".into(),
        });
        let b = Record::Performance(PerformanceRecord {
            doi_or_title: "wwww".into(),
            material_name: "xxxx".into(),
            parameter: "yyyy".into(),
            value: "zzzz".into(),
        });
        assert_eq!(record_similarity(&a, &b, &SimilarityWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn unit_spelling_variant_passes_threshold() {
        let w = SimilarityWeights::default();
        let gold = perf("PbPc", "density", "1.91 g/cm³");
        let pred = perf("PbPc", "density", "1.91 g/cm3");
        // Hand composition: three identical fields score 1; the value field is
        // text-scored because "g/cm3" carries a digit.
        let v = |s: &str| normalize_text(s);
        let (g, p) = (v("1.91 g/cm³"), v("1.91 g/cm3"));
        let value =
            (ratio_similarity(&g, &p) + ngram_jaccard(&g, &p, 2).unwrap() + ngram_jaccard(&g, &p, 3).unwrap()) / 3.0;
        // ratio 18/20, bigrams 8/10, trigrams 7/9
        assert!((value - (0.9 + 0.8 + 7.0 / 9.0) / 3.0).abs() < 1e-12);
        let expected = (3.0 + value) / 4.0;
        let got = record_similarity(&gold, &pred, &w).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(got > 0.65);
    }

    #[test]
    fn numeric_fields_compare_by_value() {
        let w = SimilarityWeights::default();
        let gold = perf("PbPc", "density", "100 g/cm³");
        let pred = perf("PbPc", "density", "90 g/cm³");
        let got = record_similarity(&gold, &pred, &w).unwrap();
        assert!((got - (3.0 + 0.9) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn missing_fields() {
        let w = SimilarityWeights::default();
        let mk = |reagents: &str| -> Record {
            SynthesisRecord {
                doi_or_title: "10.1038/s41598-020-68321-7".into(),
                material_name: "WS2".into(),
                method_name: "CVD synthesis".into(),
                method_details: "CVD".into(),
                reagents: reagents.into(),
                conditions: "Not specified in the text".into(),
                equipment: String::new(),
            }
            .into()
        };
        assert_eq!(record_similarity(&mk("Not specified"), &mk(""), &w).unwrap(), 1.0);
        let got = record_similarity(&mk("WO3"), &mk("Not specified"), &w).unwrap();
        assert!((got - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn kind_mismatch() {
        let s: Record = SynthesisRecord {
            doi_or_title: "x".into(),
            material_name: "WS2".into(),
            method_name: "CVD".into(),
            method_details: String::new(),
            reagents: String::new(),
            conditions: String::new(),
            equipment: String::new(),
        }
        .into();
        let p = perf("WS2", "band gap", "2 eV");
        assert!(matches!(
            record_similarity(&p, &s, &SimilarityWeights::default()),
            Err(EvalError::KindMismatch { .. })
        ));
    }
}
