use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::document::normalize_doi;
use super::CorpusError;
use crate::ratelimit::{Backoff, TokenBucket};

/// Bibliographic record for one work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkMetadata {
    pub doi: String,
    pub title: String,
    pub authors: Vec<String>,
    pub year: Option<i32>,
    pub venue: Option<String>,
    pub open_access_url: Option<String>,
}

// Subset of the OpenAlex work object.
#[derive(Debug, Deserialize)]
struct OpenAlexWork {
    doi: Option<String>,
    title: Option<String>,
    display_name: Option<String>,
    publication_year: Option<i32>,
    #[serde(default)]
    authorships: Vec<Authorship>,
    primary_location: Option<Location>,
    open_access: Option<OpenAccess>,
    best_oa_location: Option<Location>,
}

#[derive(Debug, Deserialize)]
struct Authorship {
    author: Option<Author>,
}

#[derive(Debug, Deserialize)]
struct Author {
    display_name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Location {
    source: Option<Source>,
    pdf_url: Option<String>,
    landing_page_url: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Source {
    display_name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct OpenAccess {
    oa_url: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SearchPage {
    #[serde(default)]
    results: Vec<OpenAlexWork>,
}

impl OpenAlexWork {
    fn into_metadata(self, requested: &str) -> Result<WorkMetadata, CorpusError> {
        let doi = self
            .doi
            .as_deref()
            .and_then(normalize_doi)
            .or_else(|| normalize_doi(requested))
            .ok_or_else(|| CorpusError::InvalidDoi(self.doi.clone().unwrap_or_default()))?;
        let title = self.title.or(self.display_name).unwrap_or_default();
        let authors = self.authorships.into_iter().filter_map(|a| a.author.and_then(|a| a.display_name)).collect();
        let venue = self.primary_location.as_ref().and_then(|l| l.source.as_ref()).and_then(|s| s.display_name.clone());
        let open_access_url = self
            .open_access
            .and_then(|o| o.oa_url)
            .or_else(|| self.best_oa_location.and_then(|l| l.pdf_url.or(l.landing_page_url)));
        Ok(WorkMetadata { doi, title, authors, year: self.publication_year, venue, open_access_url })
    }
}

/// File name used for a DOI in a fixture directory.
pub fn fixture_file_name(doi: &str) -> String {
    let encoded: String = url::form_urlencoded::byte_serialize(doi.as_bytes()).collect();
    format!("{encoded}.json")
}

enum Mode {
    Fixture(PathBuf),
    Http { base: String, agent: ureq::Agent, limiter: Arc<TokenBucket>, backoff: Backoff },
}

/// Looks up work metadata on an OpenAlex-style API, or in a local fixture
/// directory (`{dir}/{urlencoded-doi}.json`) without touching the network.
pub struct MetadataClient {
    mode: Mode,
}

impl MetadataClient {
    pub fn fixtures(dir: impl Into<PathBuf>) -> Self {
        Self { mode: Mode::Fixture(dir.into()) }
    }

    /// Client for `base` (e.g. `https://api.openalex.org`), paced at 5
    /// requests per second with the default backoff.
    pub fn http(base: impl Into<String>) -> Self {
        Self::http_with(base, Arc::new(TokenBucket::per_second(5.0)), Backoff::default())
    }

    pub fn http_with(base: impl Into<String>, limiter: Arc<TokenBucket>, backoff: Backoff) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .user_agent("matkb/0.1")
            .build()
            .into();
        Self { mode: Mode::Http { base: base.into().trim_end_matches('/').to_string(), agent, limiter, backoff } }
    }

    /// Resolves a DOI, or runs a title/keyword search when the input contains
    /// whitespace. Malformed DOIs are rejected before any lookup.
    pub fn resolve(&self, doi_or_query: &str) -> Result<WorkMetadata, CorpusError> {
        let input = doi_or_query.trim();
        if input.contains(char::is_whitespace) {
            return self.search(input);
        }
        let doi = normalize_doi(input).ok_or_else(|| CorpusError::InvalidDoi(input.to_string()))?;
        self.resolve_doi(&doi)
    }

    fn resolve_doi(&self, doi: &str) -> Result<WorkMetadata, CorpusError> {
        match &self.mode {
            Mode::Fixture(dir) => {
                let path = dir.join(fixture_file_name(doi));
                let text = match std::fs::read_to_string(&path) {
                    Ok(t) => t,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                        return Err(CorpusError::NotFound(doi.to_string()))
                    }
                    Err(e) => return Err(e.into()),
                };
                let work: OpenAlexWork = serde_json::from_str(&text)
                    .map_err(|e| CorpusError::BadResponse(format!("{}: {e}", path.display())))?;
                work.into_metadata(doi)
            }
            Mode::Http { base, .. } => {
                let url = format!("{base}/works/doi:{doi}");
                let work: OpenAlexWork = self.get_json(&url, doi)?;
                work.into_metadata(doi)
            }
        }
    }

    /// First search hit for a free-text query.
    pub fn search(&self, query: &str) -> Result<WorkMetadata, CorpusError> {
        match &self.mode {
            Mode::Fixture(_) => Err(CorpusError::NotFound(query.to_string())),
            Mode::Http { base, .. } => {
                let q: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
                let url = format!("{base}/works?search={q}&per-page=1");
                let page: SearchPage = self.get_json(&url, query)?;
                let first = page.results.into_iter().next().ok_or_else(|| CorpusError::NotFound(query.to_string()))?;
                first.into_metadata("")
            }
        }
    }

    fn get_json<T: serde::de::DeserializeOwned>(&self, url: &str, key: &str) -> Result<T, CorpusError> {
        let Mode::Http { agent, limiter, backoff, .. } = &self.mode else {
            unreachable!("fixture mode never issues requests")
        };
        let mut attempts = 0u32;
        let mut last_error;
        loop {
            limiter.acquire();
            attempts += 1;
            match agent.get(url).header("Accept", "application/json").call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 404 {
                        return Err(CorpusError::NotFound(key.to_string()));
                    }
                    if (200..300).contains(&status) {
                        return resp.body_mut().read_json::<T>().map_err(|e| CorpusError::BadResponse(e.to_string()));
                    }
                    last_error = format!("HTTP {status}");
                    if status != 429 && status < 500 {
                        return Err(CorpusError::Transport { attempts, message: last_error });
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
            if attempts > backoff.max_retries {
                return Err(CorpusError::Transport { attempts, message: last_error });
            }
            tracing::debug!(url, attempts, error = %last_error, "retrying metadata lookup");
            std::thread::sleep(backoff.delay(attempts));
        }
    }
}
