use regex::Regex;
use serde::{Deserialize, Serialize};

use super::KbError;
use crate::records::{PerformanceRecord, SynthesisRecord};

/// Filters applied before records are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationPolicy {
    /// Results scored below this are dropped whole. Unscored results pass.
    pub min_confidence: f64,
    /// Longest accepted performance `value`, in characters.
    pub max_value_chars: usize,
    /// Regular expressions; a record with any field matching one is dropped.
    pub reject_patterns: Vec<String>,
}

impl Default for CurationPolicy {
    fn default() -> Self {
        Self {
            min_confidence: 0.0,
            max_value_chars: 500,
            reject_patterns: vec![r"(?i)^\s*(n/?a|none|null|unknown|\?+|-+)\s*$".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    LowConfidence,
    ValueTooLong { chars: usize },
    EmptyField(&'static str),
    Pattern { field: &'static str, pattern: String },
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::LowConfidence => write!(f, "confidence below threshold"),
            RejectReason::ValueTooLong { chars } => write!(f, "value has {chars} characters"),
            RejectReason::EmptyField(field) => write!(f, "{field} is empty"),
            RejectReason::Pattern { field, pattern } => write!(f, "{field} matches /{pattern}/"),
        }
    }
}

pub(crate) struct Gate {
    min_confidence: f64,
    max_value_chars: usize,
    patterns: Vec<(String, Regex)>,
}

impl CurationPolicy {
    pub(crate) fn compile(&self) -> Result<Gate, KbError> {
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(KbError::Policy(format!("min_confidence {} is outside [0, 1]", self.min_confidence)));
        }
        let patterns = self
            .reject_patterns
            .iter()
            .map(|p| Regex::new(p).map(|r| (p.clone(), r)).map_err(|e| KbError::Policy(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Gate { min_confidence: self.min_confidence, max_value_chars: self.max_value_chars, patterns })
    }
}

impl Gate {
    pub(crate) fn check_confidence(&self, confidence: Option<f64>) -> Option<RejectReason> {
        match confidence {
            Some(c) if c < self.min_confidence => Some(RejectReason::LowConfidence),
            _ => None,
        }
    }

    fn check_fields(&self, fields: &[(&'static str, &str)], required: &[&'static str]) -> Option<RejectReason> {
        for (name, value) in fields {
            if required.contains(name) && value.trim().is_empty() {
                return Some(RejectReason::EmptyField(name));
            }
            if let Some((p, _)) = self.patterns.iter().find(|(_, re)| re.is_match(value)) {
                return Some(RejectReason::Pattern { field: name, pattern: p.clone() });
            }
        }
        None
    }

    pub(crate) fn check_performance(&self, r: &PerformanceRecord) -> Option<RejectReason> {
        let chars = r.value.chars().count();
        if chars > self.max_value_chars {
            return Some(RejectReason::ValueTooLong { chars });
        }
        self.check_fields(
            &[
                ("doi_or_title", &r.doi_or_title),
                ("material_name", &r.material_name),
                ("parameter", &r.parameter),
                ("value", &r.value),
            ],
            &["doi_or_title", "material_name", "parameter", "value"],
        )
    }

    pub(crate) fn check_synthesis(&self, r: &SynthesisRecord) -> Option<RejectReason> {
        self.check_fields(
            &[
                ("doi_or_title", &r.doi_or_title),
                ("material_name", &r.material_name),
                ("method_name", &r.method_name),
                ("method_details", &r.method_details),
                ("reagents", &r.reagents),
                ("conditions", &r.conditions),
                ("equipment", &r.equipment),
            ],
            &["doi_or_title", "material_name", "method_name"],
        )
    }
}
