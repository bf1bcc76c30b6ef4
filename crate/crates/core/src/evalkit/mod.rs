//! Scoring predicted extraction records against a gold set.
//!
//! Text fields are compared with a blend of the gestalt ratio and character
//! bigram/trigram Jaccard scores; numeric fields with a relative difference.
//! Gold/predicted pairs whose record score reaches the threshold become edges
//! of a bipartite graph, and a one-to-one maximum matching over that graph
//! yields TP/FP/FN and strict precision, recall and F1.

mod matching;
mod normalize;
mod record;
mod similarity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::records::RecordKind;

pub use matching::{build_match_graph, max_matching, score_records, Edge, MatchGraph, MatchReport};
pub use normalize::normalize_text;
pub use record::{parse_quantity, record_similarity};
pub use similarity::{
    char_ngrams, matching_chars, ngram_jaccard, numeric_similarity, ratio_similarity, text_similarity,
};

/// Default edge threshold on the aggregated record score.
pub const DEFAULT_THRESHOLD: f64 = 0.65;

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("n-gram size must be 2 or 3, got {0}")]
    GramSize(usize),
    #[error("numeric similarity requires finite inputs")]
    NonFinite,
    #[error("cannot compare a {gold:?} record with a {pred:?} record")]
    KindMismatch { gold: RecordKind, pred: RecordKind },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("invalid match graph: {0}")]
    InvalidGraph(String),
}

/// Weights for combining the text metrics and for combining fields into a
/// record score.
///
/// `field_weights` maps a record kind to per-field weights. A kind without an
/// entry weights its fields uniformly; fields missing from a configured map
/// get weight 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityWeights {
    pub ratio_w: f64,
    pub bigram_w: f64,
    pub trigram_w: f64,
    #[serde(default)]
    pub field_weights: BTreeMap<RecordKind, BTreeMap<String, f64>>,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self { ratio_w: 1.0 / 3.0, bigram_w: 1.0 / 3.0, trigram_w: 1.0 / 3.0, field_weights: BTreeMap::new() }
    }
}

impl SimilarityWeights {
    pub fn text_only(ratio_w: f64, bigram_w: f64, trigram_w: f64) -> Result<Self, EvalError> {
        let w = Self { ratio_w, bigram_w, trigram_w, field_weights: BTreeMap::new() };
        w.validate()?;
        Ok(w)
    }

    pub fn with_field_weights(mut self, kind: RecordKind, weights: BTreeMap<String, f64>) -> Result<Self, EvalError> {
        self.field_weights.insert(kind, weights);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let text = [self.ratio_w, self.bigram_w, self.trigram_w];
        if text.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(EvalError::InvalidWeights("text metric weights must lie in [0, 1]".into()));
        }
        let sum: f64 = text.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(EvalError::InvalidWeights(format!("text metric weights sum to {sum}")));
        }
        for (kind, fields) in &self.field_weights {
            for (name, w) in fields {
                if !kind.field_names().contains(&name.as_str()) {
                    return Err(EvalError::InvalidWeights(format!("{kind:?} has no field {name}")));
                }
                if !(0.0..=1.0).contains(w) {
                    return Err(EvalError::InvalidWeights(format!("field weight {name} = {w}")));
                }
            }
            let sum: f64 = fields.values().sum();
            if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(EvalError::InvalidWeights(format!("{kind:?} field weights sum to {sum}")));
            }
        }
        Ok(())
    }

    /// Effective per-field weights for `kind`, aligned with its field order.
    pub fn field_weights_for(&self, kind: RecordKind) -> Vec<f64> {
        let names = kind.field_names();
        match self.field_weights.get(&kind) {
            None => vec![1.0 / names.len() as f64; names.len()],
            Some(map) => names.iter().map(|f| map.get(*f).copied().unwrap_or(0.0)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weights_are_valid() {
        SimilarityWeights::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_text_sum() {
        assert!(SimilarityWeights::text_only(0.5, 0.5, 0.5).is_err());
        assert!(SimilarityWeights::text_only(1.2, -0.2, 0.0).is_err());
    }

    #[test]
    fn field_weights_per_kind() {
        let fw = BTreeMap::from([
            ("material_name".to_string(), 0.5),
            ("parameter".to_string(), 0.25),
            ("value".to_string(), 0.25),
        ]);
        let w = SimilarityWeights::default().with_field_weights(RecordKind::Performance, fw).unwrap();
        assert_eq!(w.field_weights_for(RecordKind::Performance), vec![0.0, 0.5, 0.25, 0.25]);
        assert_eq!(w.field_weights_for(RecordKind::Synthesis), vec![1.0 / 7.0; 7]);
    }

    #[test]
    fn rejects_partial_sum() {
        let fw = BTreeMap::from([("material_name".to_string(), 0.5)]);
        assert!(SimilarityWeights::default().with_field_weights(RecordKind::Synthesis, fw).is_err());
    }

    #[test]
    fn rejects_unknown_field() {
        let fw = BTreeMap::from([("colour".to_string(), 1.0)]);
        assert!(SimilarityWeights::default().with_field_weights(RecordKind::Performance, fw).is_err());
    }
}
