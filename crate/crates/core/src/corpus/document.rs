use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::segment::{RuleSegmenter, Segmenter, Sentence};
use super::CorpusError;

/// One article's normalized plain text and its sentence spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub doi: Option<String>,
    pub title: Option<String>,
    pub body: String,
    pub sentences: Vec<Sentence>,
    pub source_path: String,
}

/// Optional metadata supplied alongside the text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentHint {
    pub doi: Option<String>,
    pub title: Option<String>,
}

fn doi_pattern() -> &'static Regex {
    static DOI: OnceLock<Regex> = OnceLock::new();
    DOI.get_or_init(|| Regex::new(r"^10\.\d{4,9}/\S+$").unwrap())
}

/// Strips resolver prefixes and lowercases; returns `None` unless the result
/// has the `10.<registrant>/<suffix>` shape.
pub fn normalize_doi(raw: &str) -> Option<String> {
    let mut d = raw.trim();
    for prefix in ["https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "doi:", "DOI:"] {
        if let Some(rest) = d.strip_prefix(prefix) {
            d = rest.trim();
        }
    }
    let d = d.to_lowercase();
    doi_pattern().is_match(&d).then_some(d)
}

/// Unifies line endings, turns tabs into spaces and drops other control
/// characters (and a leading byte-order mark).
pub fn normalize_body(raw: &str) -> String {
    let raw = raw.strip_prefix('\u{feff}').unwrap_or(raw);
    let unified = raw.replace("\r\n", "\n").replace('\r', "\n");
    unified
        .chars()
        .filter_map(|c| match c {
            '\n' => Some('\n'),
            '\t' => Some(' '),
            c if c.is_control() => None,
            c => Some(c),
        })
        .collect()
}

impl Document {
    /// Builds a document from already-decoded text.
    pub fn from_text(
        text: &str,
        source: impl Into<String>,
        hint: DocumentHint,
        segmenter: &dyn Segmenter,
    ) -> Result<Self, CorpusError> {
        let body = normalize_body(text);
        if body.trim().is_empty() {
            return Err(CorpusError::EmptyDocument);
        }
        let doi = match hint.doi {
            Some(raw) => Some(normalize_doi(&raw).ok_or(CorpusError::InvalidDoi(raw))?),
            None => None,
        };
        let digest = Sha256::digest(body.as_bytes());
        let id = hex::encode(&digest[..8]);
        let sentences = segmenter.segment(&body);
        Ok(Self { id, doi, title: hint.title, body, sentences, source_path: source.into() })
    }

    /// Body text between two scalar offsets.
    pub fn slice(&self, char_start: usize, char_end: usize) -> String {
        self.body.chars().skip(char_start).take(char_end.saturating_sub(char_start)).collect()
    }

    /// Reassembles the body from the sentence texts and the whitespace between them.
    pub fn reassemble(&self) -> String {
        let chars: Vec<char> = self.body.chars().collect();
        let mut out = String::new();
        let mut pos = 0;
        for s in &self.sentences {
            out.extend(&chars[pos..s.char_start]);
            out.push_str(&s.text);
            pos = s.char_end;
        }
        out.extend(&chars[pos..]);
        out
    }
}

/// Decodes UTF-8 bytes and builds a [`Document`] with the default segmenter.
pub fn ingest_bytes(bytes: &[u8], source: &str, hint: DocumentHint) -> Result<Document, CorpusError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CorpusError::Encoding { source_path: source.to_string(), offset: e.valid_up_to() })?;
    Document::from_text(text, source, hint, &RuleSegmenter::default())
}

/// Reads a plain-text file (for example converted PDF output) into a [`Document`].
pub fn ingest_text(path: &Path, hint: DocumentHint) -> Result<Document, CorpusError> {
    let bytes = std::fs::read(path)?;
    ingest_bytes(&bytes, &path.display().to_string(), hint)
}
