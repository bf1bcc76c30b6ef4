use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExtractConfig;
use crate::corpus::Document;
use crate::llm::{strip_code_fence, ChatClient, ChatRequest, LlmError, Message, Role};

/// Material families the classifier may answer with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "graphene")]
    Graphene,
    #[serde(rename = "TMD")]
    Tmd,
    #[serde(rename = "MXene")]
    MXene,
    #[serde(rename = "hBN")]
    HBn,
    #[serde(rename = "other")]
    Other,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Graphene, Family::Tmd, Family::MXene, Family::HBn, Family::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Graphene => "graphene",
            Family::Tmd => "TMD",
            Family::MXene => "MXene",
            Family::HBn => "hBN",
            Family::Other => "other",
        }
    }

    /// Case-insensitive; hyphens and spaces are ignored (`h-BN` is `hBN`).
    pub fn parse(s: &str) -> Option<Family> {
        let key: String = s.chars().filter(|c| *c != '-' && !c.is_whitespace()).collect::<String>().to_lowercase();
        Family::ALL.into_iter().find(|f| f.as_str().to_lowercase() == key)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relevance {
    pub related: bool,
    pub family: Family,
    pub confidence: f64,
    pub attempts: u32,
}

/// Problems with a classifier reply.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelevanceError {
    #[error("unparseable classifier reply: {0}")]
    Unparseable(String),
    #[error("family `{family}` is not in the vocabulary")]
    OutOfVocabulary { related: bool, family: String },
}

/// Parses `{"related": bool, "family": str, "confidence": 0..=1}`.
pub fn parse_relevance(raw: &str) -> Result<(bool, Family, f64), RelevanceError> {
    let bad = |m: &str| RelevanceError::Unparseable(m.to_string());
    let v: Value = serde_json::from_str(strip_code_fence(raw)).map_err(|e| bad(&e.to_string()))?;
    let related = v.get("related").and_then(Value::as_bool).ok_or_else(|| bad("`related` must be a boolean"))?;
    let family_raw = v.get("family").and_then(Value::as_str).ok_or_else(|| bad("`family` must be a string"))?;
    let confidence = v
        .get("confidence")
        .and_then(Value::as_f64)
        .filter(|c| (0.0..=1.0).contains(c))
        .ok_or_else(|| bad("`confidence` must be a number in [0, 1]"))?;
    let family = Family::parse(family_raw)
        .ok_or_else(|| RelevanceError::OutOfVocabulary { related, family: family_raw.to_string() })?;
    Ok((related, family, confidence))
}

const EXCERPT_CHARS: usize = 4_000;

/// Asks whether `doc` concerns 2D materials and which family.
///
/// Invalid replies are retried up to `config.max_attempts` calls. If none is
/// usable the answer degrades to family `other` with confidence 0, keeping
/// the last `related` flag the model gave (false when it never gave one).
pub fn classify_relevance(
    doc: &Document,
    client: &dyn ChatClient,
    config: &ExtractConfig,
) -> Result<Relevance, LlmError> {
    let excerpt: String = doc.body.chars().take(EXCERPT_CHARS).collect();
    let user = match &doc.title {
        Some(t) => format!("Title: {t}\n\nExcerpt:\n{excerpt}"),
        None => format!("Excerpt:\n{excerpt}"),
    };
    let mut messages = vec![Message::system(&config.templates.classifier), Message::user(user)];
    let mut related = false;
    let mut attempts = 0;
    while attempts < config.max_attempts.max(1) {
        attempts += 1;
        let request = ChatRequest::new(Role::Classifier, &config.model, messages.clone()).with_subject(&doc.id);
        let reply = client.complete(&request)?;
        match parse_relevance(&reply) {
            Ok((related, family, confidence)) => return Ok(Relevance { related, family, confidence, attempts }),
            Err(err) => {
                if let RelevanceError::OutOfVocabulary { related: r, .. } = &err {
                    related = *r;
                }
                messages.push(Message::assistant(reply));
                messages.push(Message::user(format!("{err}. Answer again with only the JSON object.")));
            }
        }
    }
    Ok(Relevance { related, family: Family::Other, confidence: 0.0, attempts })
}
