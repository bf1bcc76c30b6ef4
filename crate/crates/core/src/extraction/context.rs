use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ExtractConfig, ExtractionError};
use crate::corpus::Document;
use crate::llm::Message;

/// A run of whole sentences, `sentences` indexing `Document::sentences`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub sentences: Range<usize>,
    /// Characters of the document body the chunk spans.
    pub chars: usize,
}

/// Packs sentences greedily into chunks spanning at most `max_chars`
/// characters of the body. Sentences are never split.
pub fn chunk_document(doc: &Document, max_chars: usize) -> Result<Vec<Chunk>, ExtractionError> {
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < doc.sentences.len() {
        let origin = doc.sentences[start].char_start;
        let first_len = doc.sentences[start].char_end - origin;
        if first_len > max_chars {
            return Err(ExtractionError::SentenceTooLong { index: start, chars: first_len, max: max_chars });
        }
        let mut end = start + 1;
        while end < doc.sentences.len() && doc.sentences[end].char_end - origin <= max_chars {
            end += 1;
        }
        let chars = doc.sentences[end - 1].char_end - origin;
        chunks.push(Chunk { index: chunks.len(), sentences: start..end, chars });
        start = end;
    }
    Ok(chunks)
}

/// Everything sent to the model for one chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub template_version: String,
    pub chunk: Chunk,
    pub role_preamble: String,
    pub json_schema: String,
    pub rules: Vec<String>,
    /// Chunk sentences, one per line, each prefixed with its `[S<n>]` marker.
    pub document_chunk: String,
    pub max_chunk_chars: usize,
}

impl PromptContext {
    pub fn system_message(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.role_preamble);
        s.push_str("\n\nOutput JSON schema:\n");
        s.push_str(&self.json_schema);
        s.push_str("\n\nRules:\n");
        for (i, rule) in self.rules.iter().enumerate() {
            let _ = writeln!(s, "{}. {rule}", i + 1);
        }
        s.truncate(s.trim_end().len());
        s
    }

    pub fn user_message(&self) -> String {
        format!("Excerpt:\n{}", self.document_chunk)
    }

    pub fn messages(&self) -> Vec<Message> {
        vec![Message::system(self.system_message()), Message::user(self.user_message())]
    }

    /// Characters across both messages.
    pub fn len_chars(&self) -> usize {
        self.system_message().chars().count() + self.user_message().chars().count()
    }
}

/// Assembles the prompt for chunk `chunk_index` of `doc`.
pub fn build_context(
    doc: &Document,
    chunk_index: usize,
    config: &ExtractConfig,
) -> Result<PromptContext, ExtractionError> {
    let chunks = chunk_document(doc, config.max_chunk_chars)?;
    let count = chunks.len();
    let chunk =
        chunks.into_iter().nth(chunk_index).ok_or(ExtractionError::ChunkOutOfRange { index: chunk_index, count })?;
    context_for(doc, chunk, config)
}

pub(super) fn context_for(
    doc: &Document,
    chunk: Chunk,
    config: &ExtractConfig,
) -> Result<PromptContext, ExtractionError> {
    let mut body = String::new();
    for s in &doc.sentences[chunk.sentences.clone()] {
        if !body.is_empty() {
            body.push('\n');
        }
        let _ = write!(body, "[S{}] {}", s.index, s.text);
    }
    let t = &config.templates;
    let ctx = PromptContext {
        template_version: t.version.clone(),
        chunk,
        role_preamble: t.role_preamble.clone(),
        json_schema: t.json_schema.clone(),
        rules: t.rules.clone(),
        document_chunk: body,
        max_chunk_chars: config.max_chunk_chars,
    };
    let chars = ctx.len_chars();
    if chars > config.context_budget_chars {
        return Err(ExtractionError::ContextBudget {
            chunk: ctx.chunk.index,
            chars,
            budget: config.context_budget_chars,
        });
    }
    Ok(ctx)
}
