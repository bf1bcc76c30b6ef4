use std::collections::HashMap;
use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::context::{chunk_document, context_for};
use super::schema::{validate_schema, ExtractedPayload, Provenance, SchemaError};
use super::{ExtractConfig, ExtractionError};
use crate::corpus::Document;
use crate::llm::{ChatClient, ChatRequest, Message, Role};
use crate::records::{PerformanceRecord, SynthesisRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Success,
    SchemaFailure,
    TransportFailure,
}

/// Outcome of extracting one document. Records are kept only when every
/// chunk succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub document_id: String,
    pub title: Option<String>,
    pub doi: Option<String>,
    pub performance: Vec<PerformanceRecord>,
    pub synthesis: Vec<SynthesisRecord>,
    pub provenance: Provenance,
    /// Chat calls made across all chunks, retries included.
    pub attempt_count: u32,
    pub status: ExtractionStatus,
    /// Reviewer or classifier score; checked by curation when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Last error seen when `status` is not `success`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub template_version: String,
}

impl ExtractionResult {
    pub fn record_count(&self) -> usize {
        self.performance.len() + self.synthesis.len()
    }
}

/// Share of results whose status is not `success`; 0 for no results.
pub fn failure_rate(results: &[ExtractionResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let failed = results.iter().filter(|r| r.status != ExtractionStatus::Success).count();
    failed as f64 / results.len() as f64
}

enum ChunkOutcome {
    Parsed(ExtractedPayload),
    Schema(SchemaError),
    Transport(String),
}

fn check_provenance(payload: &ExtractedPayload, range: &Range<usize>) -> Result<(), SchemaError> {
    let lists = [("performance", &payload.provenance.performance), ("synthesis", &payload.provenance.synthesis)];
    for (name, list) in lists {
        for (i, cited) in list.iter().enumerate() {
            if let Some(&index) = cited.iter().find(|n| !range.contains(n)) {
                return Err(SchemaError::BadProvenance { path: format!("{name}[{i}].sentences"), index });
            }
        }
    }
    Ok(())
}

fn extract_chunk(
    doc: &Document,
    messages: Vec<Message>,
    range: &Range<usize>,
    client: &dyn ChatClient,
    config: &ExtractConfig,
    attempts: &mut u32,
) -> ChunkOutcome {
    let mut messages = messages;
    let mut last = None;
    for _ in 0..config.max_attempts.max(1) {
        *attempts += 1;
        let request = ChatRequest::new(Role::Extractor, &config.model, messages.clone()).with_subject(&doc.id);
        let reply = match client.complete(&request) {
            Ok(r) => r,
            Err(e) => return ChunkOutcome::Transport(e.to_string()),
        };
        match validate_schema(&reply).and_then(|p| check_provenance(&p, range).map(|_| p)) {
            Ok(payload) => return ChunkOutcome::Parsed(payload),
            Err(err) => {
                tracing::debug!(document = %doc.id, attempt = *attempts, %err, "extraction reply rejected");
                messages.push(Message::assistant(reply));
                messages.push(Message::user(config.templates.retry.replace("{error}", &err.to_string())));
                last = Some(err);
            }
        }
    }
    ChunkOutcome::Schema(last.expect("at least one attempt"))
}

/// Runs every chunk of `doc` through the extractor.
///
/// Model misbehavior and endpoint failures end up in `status`; the only
/// errors returned are chunking and prompt-budget problems, which no retry
/// can fix.
pub fn extract(
    doc: &Document,
    client: &dyn ChatClient,
    config: &ExtractConfig,
) -> Result<ExtractionResult, ExtractionError> {
    let chunks = chunk_document(doc, config.max_chunk_chars)?;
    let contexts = chunks.into_iter().map(|c| context_for(doc, c, config)).collect::<Result<Vec<_>, _>>()?;

    let mut result = ExtractionResult {
        document_id: doc.id.clone(),
        title: doc.title.clone(),
        doi: doc.doi.clone(),
        performance: Vec::new(),
        synthesis: Vec::new(),
        provenance: Provenance::default(),
        attempt_count: 0,
        status: ExtractionStatus::Success,
        confidence: None,
        error: None,
        template_version: config.templates.version.clone(),
    };
    let mut payloads = Vec::new();
    for ctx in &contexts {
        let range = ctx.chunk.sentences.clone();
        match extract_chunk(doc, ctx.messages(), &range, client, config, &mut result.attempt_count) {
            ChunkOutcome::Parsed(p) => payloads.push(p),
            ChunkOutcome::Schema(e) => {
                result.status = ExtractionStatus::SchemaFailure;
                result.error = Some(e.to_string());
                break;
            }
            ChunkOutcome::Transport(e) => {
                result.status = ExtractionStatus::TransportFailure;
                result.error = Some(e);
                break;
            }
        }
    }
    if result.status == ExtractionStatus::Success {
        merge(&mut result, payloads, doc);
    }
    Ok(result)
}

fn merge(result: &mut ExtractionResult, payloads: Vec<ExtractedPayload>, doc: &Document) {
    if result.title.is_none() {
        result.title = payloads.iter().find_map(|p| p.title.clone());
    }
    if result.doi.is_none() {
        result.doi = payloads.iter().find_map(|p| p.doi.clone());
    }
    let key = result.doi.clone().or_else(|| result.title.clone()).unwrap_or_else(|| doc.id.clone());
    let mut perf_seen: HashMap<PerformanceRecord, usize> = HashMap::new();
    let mut syn_seen: HashMap<SynthesisRecord, usize> = HashMap::new();
    for p in payloads {
        for (mut rec, cited) in p.performance.into_iter().zip(p.provenance.performance) {
            if rec.doi_or_title.is_empty() {
                rec.doi_or_title = key.clone();
            }
            if let Some(&at) = perf_seen.get(&rec) {
                union_into(&mut result.provenance.performance[at], cited);
            } else {
                perf_seen.insert(rec.clone(), result.performance.len());
                result.performance.push(rec);
                result.provenance.performance.push(cited);
            }
        }
        for (mut rec, cited) in p.synthesis.into_iter().zip(p.provenance.synthesis) {
            if rec.doi_or_title.is_empty() {
                rec.doi_or_title = key.clone();
            }
            if let Some(&at) = syn_seen.get(&rec) {
                union_into(&mut result.provenance.synthesis[at], cited);
            } else {
                syn_seen.insert(rec.clone(), result.synthesis.len());
                result.synthesis.push(rec);
                result.provenance.synthesis.push(cited);
            }
        }
    }
}

fn union_into(into: &mut Vec<usize>, more: Vec<usize>) {
    into.extend(more);
    into.sort_unstable();
    into.dedup();
}

/// Extracts `docs` on up to `workers` threads. Output order follows input
/// order. Pace the endpoint by giving the client a shared rate limiter.
pub fn extract_many(
    docs: &[Document],
    client: &dyn ChatClient,
    config: &ExtractConfig,
    workers: usize,
) -> Vec<Result<ExtractionResult, ExtractionError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ExtractionResult, ExtractionError>>>> =
        Mutex::new((0..docs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, docs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(doc) = docs.get(i) else { break };
                let r = extract(doc, client, config);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}
