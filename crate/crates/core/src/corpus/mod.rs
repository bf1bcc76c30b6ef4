//! Plain-text ingestion, sentence segmentation and article metadata lookup.
//!
//! Input is the plain text produced by an external PDF converter; PDF parsing
//! itself is not handled here.

mod document;
mod metadata;
mod segment;

pub use document::{ingest_bytes, ingest_text, normalize_body, normalize_doi, Document, DocumentHint};
pub use metadata::{fixture_file_name, MetadataClient, WorkMetadata};
pub use segment::{segment, RuleSegmenter, Segmenter, Sentence, DEFAULT_ABBREVIATIONS};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{source_path} is not valid UTF-8 (first bad byte at offset {offset})")]
    Encoding { source_path: String, offset: usize },
    #[error("document body is empty")]
    EmptyDocument,
    #[error("malformed DOI {0:?}")]
    InvalidDoi(String),
    #[error("no work found for {0:?}")]
    NotFound(String),
    #[error("metadata request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected metadata response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
