use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::llm::strip_code_fence;
use crate::records::{PerformanceRecord, SynthesisRecord, NOT_SPECIFIED};

/// Why a model reply was not a valid extraction payload.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("`{path}` must be {expected}")]
    WrongType { path: String, expected: &'static str },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{0}` must not be empty")]
    EmptyField(String),
    #[error("`{path}` cites sentence {index}, which is not in this excerpt")]
    BadProvenance { path: String, index: usize },
}

impl SchemaError {
    /// Stable identifier for reports and counters.
    pub fn kind(&self) -> &'static str {
        match self {
            SchemaError::Malformed(_) => "malformed",
            SchemaError::MissingKey(_) => "missing_key",
            SchemaError::WrongType { .. } => "wrong_type",
            SchemaError::UnknownKey(_) => "unknown_key",
            SchemaError::EmptyField(_) => "empty_field",
            SchemaError::BadProvenance { .. } => "bad_provenance",
        }
    }
}

/// Cited `[S<n>]` sentence indices, parallel to the record lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub performance: Vec<Vec<usize>>,
    pub synthesis: Vec<Vec<usize>>,
}

impl Provenance {
    pub fn all(&self) -> impl Iterator<Item = usize> + '_ {
        self.performance.iter().chain(&self.synthesis).flatten().copied()
    }
}

/// A schema-valid reply. Records whose `doi_or_title` was omitted carry the
/// payload's DOI or title, or an empty string when it has neither.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedPayload {
    pub title: Option<String>,
    pub doi: Option<String>,
    pub performance: Vec<PerformanceRecord>,
    pub synthesis: Vec<SynthesisRecord>,
    pub provenance: Provenance,
}

const TOP_KEYS: [&str; 4] = ["title", "doi", "performance", "synthesis"];

/// Parses a reply against the extraction grammar:
///
/// * one object with exactly `title`, `doi` (string or null), `performance`
///   and `synthesis` (arrays of objects);
/// * performance objects require non-empty `material_name`, `parameter` and
///   `value`; synthesis objects require non-empty `material_name` and
///   `method_name`, other synthesis fields default to `"Not specified"`;
/// * `doi_or_title` and `sentences` (array of non-negative integers) are
///   optional on every record; any other key is rejected.
///
/// A surrounding Markdown code fence is removed first.
pub fn validate_schema(raw: &str) -> Result<ExtractedPayload, SchemaError> {
    let text = strip_code_fence(raw);
    let value: Value = serde_json::from_str(text).map_err(|e| SchemaError::Malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(SchemaError::WrongType { path: "$".into(), expected: "an object" });
    };
    if let Some(extra) = obj.keys().find(|k| !TOP_KEYS.contains(&k.as_str())) {
        return Err(SchemaError::UnknownKey(extra.clone()));
    }
    for key in TOP_KEYS {
        if !obj.contains_key(key) {
            return Err(SchemaError::MissingKey(key.into()));
        }
    }
    let title = nullable_string(&obj["title"], "title")?;
    let doi = nullable_string(&obj["doi"], "doi")?;
    let fallback = doi.clone().or_else(|| title.clone()).unwrap_or_default();

    let mut out = ExtractedPayload { title, doi, ..Default::default() };
    for (i, item) in array(&obj["performance"], "performance")?.iter().enumerate() {
        let path = format!("performance[{i}]");
        let rec = record_object(item, &path, &["material_name", "parameter", "value"], &[])?;
        out.performance.push(PerformanceRecord {
            doi_or_title: rec.doi_or_title.clone().unwrap_or_else(|| fallback.clone()),
            material_name: rec.take("material_name"),
            parameter: rec.take("parameter"),
            value: rec.take("value"),
        });
        out.provenance.performance.push(rec.sentences);
    }
    const SYN_OPTIONAL: [&str; 4] = ["method_details", "reagents", "conditions", "equipment"];
    for (i, item) in array(&obj["synthesis"], "synthesis")?.iter().enumerate() {
        let path = format!("synthesis[{i}]");
        let rec = record_object(item, &path, &["material_name", "method_name"], &SYN_OPTIONAL)?;
        out.synthesis.push(SynthesisRecord {
            doi_or_title: rec.doi_or_title.clone().unwrap_or_else(|| fallback.clone()),
            material_name: rec.take("material_name"),
            method_name: rec.take("method_name"),
            method_details: rec.take("method_details"),
            reagents: rec.take("reagents"),
            conditions: rec.take("conditions"),
            equipment: rec.take("equipment"),
        });
        out.provenance.synthesis.push(rec.sentences);
    }
    Ok(out)
}

fn nullable_string(v: &Value, path: &str) -> Result<Option<String>, SchemaError> {
    match v {
        Value::Null => Ok(None),
        Value::String(s) if s.trim().is_empty() => Ok(None),
        Value::String(s) => Ok(Some(s.trim().to_string())),
        _ => Err(SchemaError::WrongType { path: path.into(), expected: "a string or null" }),
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array().ok_or_else(|| SchemaError::WrongType { path: path.into(), expected: "an array" })
}

struct RecordFields {
    doi_or_title: Option<String>,
    values: Vec<(String, String)>,
    sentences: Vec<usize>,
}

impl RecordFields {
    fn take(&self, key: &str) -> String {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone()).unwrap_or_else(|| NOT_SPECIFIED.to_string())
    }
}

fn record_object(item: &Value, path: &str, required: &[&str], optional: &[&str]) -> Result<RecordFields, SchemaError> {
    let obj: &Map<String, Value> =
        item.as_object().ok_or_else(|| SchemaError::WrongType { path: path.into(), expected: "an object" })?;
    for key in obj.keys() {
        let k = key.as_str();
        if !(required.contains(&k) || optional.contains(&k) || k == "doi_or_title" || k == "sentences") {
            return Err(SchemaError::UnknownKey(format!("{path}.{key}")));
        }
    }
    let mut values = Vec::new();
    for &key in required {
        let field = format!("{path}.{key}");
        match obj.get(key) {
            None => return Err(SchemaError::MissingKey(field)),
            Some(Value::String(s)) if s.trim().is_empty() => return Err(SchemaError::EmptyField(field)),
            Some(Value::String(s)) => values.push((key.to_string(), s.trim().to_string())),
            Some(_) => return Err(SchemaError::WrongType { path: field, expected: "a string" }),
        }
    }
    for &key in optional {
        match obj.get(key) {
            None | Some(Value::Null) => {}
            Some(Value::String(s)) if s.trim().is_empty() => {}
            Some(Value::String(s)) => values.push((key.to_string(), s.trim().to_string())),
            Some(_) => {
                return Err(SchemaError::WrongType { path: format!("{path}.{key}"), expected: "a string or null" })
            }
        }
    }
    let doi_or_title = match obj.get("doi_or_title") {
        None => None,
        Some(v) => nullable_string(v, &format!("{path}.doi_or_title"))?,
    };
    let sentences = match obj.get("sentences") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|n| {
                n.as_u64().map(|n| n as usize).ok_or_else(|| SchemaError::WrongType {
                    path: format!("{path}.sentences"),
                    expected: "an array of non-negative integers",
                })
            })
            .collect::<Result<_, _>>()?,
        Some(_) => {
            return Err(SchemaError::WrongType {
                path: format!("{path}.sentences"),
                expected: "an array of non-negative integers",
            })
        }
    };
    Ok(RecordFields { doi_or_title, values, sentences })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_payload() {
        let p = validate_schema(r#"{"title": null, "doi": null, "performance": [], "synthesis": []}"#).unwrap();
        assert!(p.performance.is_empty() && p.synthesis.is_empty());
    }

    #[test]
    fn error_kinds_are_distinct() {
        let cases = [
            ("not json", "malformed"),
            (r#"{"title": null, "doi": null, "synthesis": []}"#, "missing_key"),
            (r#"{"title": 3, "doi": null, "performance": [], "synthesis": []}"#, "wrong_type"),
            (r#"{"title": null, "doi": null, "performance": [], "synthesis": [], "notes": ""}"#, "unknown_key"),
            (
                r#"{"title": null, "doi": null, "synthesis": [],
                   "performance": [{"material_name": " ", "parameter": "p", "value": "1"}]}"#,
                "empty_field",
            ),
            ("[]", "wrong_type"),
        ];
        for (raw, kind) in cases {
            assert_eq!(validate_schema(raw).unwrap_err().kind(), kind, "{raw}");
        }
        assert_eq!(
            validate_schema(r#"{"title": null, "doi": null, "synthesis": []}"#).unwrap_err(),
            SchemaError::MissingKey("performance".into())
        );
    }

    #[test]
    fn record_keys_are_strict() {
        let raw = r#"{"title": null, "doi": null, "synthesis": [],
            "performance": [{"material_name": "m", "parameter": "p", "value": "1", "unit": "eV"}]}"#;
        assert_eq!(validate_schema(raw).unwrap_err(), SchemaError::UnknownKey("performance[0].unit".into()));
        let raw = r#"{"title": null, "doi": null, "synthesis": [],
            "performance": [{"material_name": "m", "parameter": "p", "value": 1.5}]}"#;
        assert_eq!(validate_schema(raw).unwrap_err().kind(), "wrong_type");
    }

    #[test]
    fn synthesis_defaults_and_fallback_key() {
        let raw = r#"{"title": "T", "doi": "10.1/x", "performance": [],
            "synthesis": [{"material_name": "WS2", "method_name": "CVD", "reagents": "", "sentences": [0, 2]}]}"#;
        let p = validate_schema(raw).unwrap();
        let s = &p.synthesis[0];
        assert_eq!(s.doi_or_title, "10.1/x");
        assert_eq!(s.reagents, NOT_SPECIFIED);
        assert_eq!(s.equipment, NOT_SPECIFIED);
        assert_eq!(p.provenance.synthesis, vec![vec![0, 2]]);
    }
}
