//! Schema-constrained extraction of article metadata, synthesis routes and
//! performance values through a chat-completion endpoint.

mod classify;
mod context;
mod run;
mod schema;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use classify::{classify_relevance, parse_relevance, Family, Relevance, RelevanceError};
pub use context::{build_context, chunk_document, Chunk, PromptContext};
pub use run::{extract, extract_many, failure_rate, ExtractionResult, ExtractionStatus};
pub use schema::{validate_schema, ExtractedPayload, Provenance, SchemaError};

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error("sentence {index} has {chars} characters, more than max_chunk_chars={max}")]
    SentenceTooLong { index: usize, chars: usize, max: usize },
    #[error("chunk {index} out of range ({count} chunks)")]
    ChunkOutOfRange { index: usize, count: usize },
    #[error("prompt for chunk {chunk} needs {chars} characters, context budget is {budget}")]
    ContextBudget { chunk: usize, chars: usize, budget: usize },
    #[error("template {name}: {source}")]
    Template {
        name: String,
        #[source]
        source: std::io::Error,
    },
}

/// Prompt text for extraction and classification.
///
/// The defaults are compiled in from `templates/`; [`Templates::load_dir`]
/// reads replacements with the same file names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub version: String,
    pub role_preamble: String,
    pub json_schema: String,
    pub rules: Vec<String>,
    /// Corrective message appended on retry; `{error}` is replaced by the
    /// validation error.
    pub retry: String,
    pub classifier: String,
}

pub const TEMPLATE_VERSION: &str = "extractor-v1";

impl Default for Templates {
    fn default() -> Self {
        Self::from_parts(
            TEMPLATE_VERSION,
            include_str!("../../templates/extractor_role.txt"),
            include_str!("../../templates/extractor_schema.json"),
            include_str!("../../templates/extractor_rules.txt"),
            include_str!("../../templates/extractor_retry.txt"),
            include_str!("../../templates/classifier.txt"),
        )
    }
}

impl Templates {
    fn from_parts(version: &str, role: &str, schema: &str, rules: &str, retry: &str, classifier: &str) -> Self {
        Self {
            version: version.to_string(),
            role_preamble: role.trim().to_string(),
            json_schema: schema.trim().to_string(),
            rules: rules.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect(),
            retry: retry.trim().to_string(),
            classifier: classifier.trim().to_string(),
        }
    }

    /// Loads `extractor_role.txt`, `extractor_schema.json`,
    /// `extractor_rules.txt` (one rule per line), `extractor_retry.txt` and
    /// `classifier.txt` from `dir`, plus an optional `VERSION` file.
    pub fn load_dir(dir: &Path) -> Result<Self, ExtractionError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|source| ExtractionError::Template { name: name.to_string(), source })
        };
        let version = std::fs::read_to_string(dir.join("VERSION"))
            .map(|v| v.trim().to_string())
            .unwrap_or_else(|_| format!("custom:{}", dir.display()));
        Ok(Self::from_parts(
            &version,
            &read("extractor_role.txt")?,
            &read("extractor_schema.json")?,
            &read("extractor_rules.txt")?,
            &read("extractor_retry.txt")?,
            &read("classifier.txt")?,
        ))
    }
}

/// Knobs for one extraction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub model: String,
    pub max_chunk_chars: usize,
    /// Upper bound on system + user message characters per call.
    pub context_budget_chars: usize,
    /// Calls per chunk before giving up on schema errors.
    pub max_attempts: u32,
    pub templates: Templates,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            model: "extractor".into(),
            max_chunk_chars: 12_000,
            context_budget_chars: 32_000,
            max_attempts: 3,
            templates: Templates::default(),
        }
    }
}

impl ExtractConfig {
    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}
