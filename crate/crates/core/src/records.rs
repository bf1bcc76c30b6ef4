//! The two extraction record shapes stored in the knowledge base.

use serde::{Deserialize, Serialize};

/// Placeholder for synthesis fields the source text does not state.
pub const NOT_SPECIFIED: &str = "Not specified";

/// One reported property value of a material.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub doi_or_title: String,
    pub material_name: String,
    pub parameter: String,
    /// Verbatim value including units, e.g. `1.91 g/cm ³`.
    pub value: String,
}

/// One synthesis route for a material.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SynthesisRecord {
    pub doi_or_title: String,
    pub material_name: String,
    pub method_name: String,
    pub method_details: String,
    pub reagents: String,
    pub conditions: String,
    pub equipment: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Performance,
    Synthesis,
}

impl RecordKind {
    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            RecordKind::Performance => &PERFORMANCE_FIELDS,
            RecordKind::Synthesis => &SYNTHESIS_FIELDS,
        }
    }
}

pub const PERFORMANCE_FIELDS: [&str; 4] = ["doi_or_title", "material_name", "parameter", "value"];

pub const SYNTHESIS_FIELDS: [&str; 7] =
    ["doi_or_title", "material_name", "method_name", "method_details", "reagents", "conditions", "equipment"];

/// Either record shape, tagged by `kind` on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Performance(PerformanceRecord),
    Synthesis(SynthesisRecord),
}

impl Record {
    pub fn kind(&self) -> RecordKind {
        match self {
            Record::Performance(_) => RecordKind::Performance,
            Record::Synthesis(_) => RecordKind::Synthesis,
        }
    }

    /// Field values in the order of [`RecordKind::field_names`].
    pub fn field_values(&self) -> Vec<&str> {
        match self {
            Record::Performance(p) => {
                vec![&p.doi_or_title, &p.material_name, &p.parameter, &p.value]
            }
            Record::Synthesis(s) => vec![
                &s.doi_or_title,
                &s.material_name,
                &s.method_name,
                &s.method_details,
                &s.reagents,
                &s.conditions,
                &s.equipment,
            ],
        }
    }

    pub fn fields(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.kind().field_names().iter().copied().zip(self.field_values())
    }
}

impl From<PerformanceRecord> for Record {
    fn from(r: PerformanceRecord) -> Self {
        Record::Performance(r)
    }
}

impl From<SynthesisRecord> for Record {
    fn from(r: SynthesisRecord) -> Self {
        Record::Synthesis(r)
    }
}

/// True for empty text and for the "Not specified" family of placeholders.
pub fn is_unspecified(value: &str) -> bool {
    let v = value.trim();
    v.is_empty() || v.to_lowercase().starts_with("not specified")
}
