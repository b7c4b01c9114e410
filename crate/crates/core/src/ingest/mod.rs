//! Upstream clients for arXiv (title search, LaTeX source) and Semantic
//! Scholar (metadata, references, recommendations).
//!
//! All requests go through one [`Fetcher`], which layers the on-disk cache,
//! the rate limiter and retries over an injectable [`Transport`].

mod arxiv;
mod cache;
mod ratelimit;
mod scholar;
mod transport;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;

pub use arxiv::{is_valid_arxiv_id, ArxivClient, MAX_SEARCH_LIMIT};
pub use cache::{CacheError, CacheKey, Miss, ResponseCache, DEFAULT_MAX_BYTES, DEFAULT_TTL};
pub use ratelimit::RateLimiter;
pub use scholar::ScholarClient;
pub use transport::{
    FixtureError, FixtureTransport, HttpRequest, HttpResponse, Method, ReqwestTransport,
    Transport, TransportError,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("malformed arXiv identifier: {0:?}")]
    BadId(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("no LaTeX source available for {0}")]
    SourceUnavailable(String),
    #[error("rate limited by upstream")]
    RateLimited,
    #[error("upstream unavailable: {0}")]
    UpstreamUnavailable(String),
}

impl IngestError {
    pub fn is_transient(&self) -> bool {
        matches!(self, Self::RateLimited | Self::UpstreamUnavailable(_))
    }
}

/// A paper's identity and metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arxiv_id: Option<String>,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_count: Option<u64>,
}

impl PaperRecord {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            arxiv_id: None,
            title: title.into(),
            abstract_text: String::new(),
            authors: Vec::new(),
            year: None,
            venue: None,
            url: None,
            citation_count: None,
        }
    }

    /// Title plus abstract, the text embedded for similarity ranking.
    pub fn similarity_text(&self) -> String {
        if self.abstract_text.trim().is_empty() {
            self.title.clone()
        } else {
            format!("{}\n{}", self.title, self.abstract_text)
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.title.trim().is_empty()
            && self.year.is_none_or(|y| (1900..=2100).contains(&y))
    }
}

/// LaTeX source of one arXiv paper, flattened into a single main file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatexBundle {
    pub arxiv_id: String,
    pub main_source: String,
    pub bib_sources: Vec<String>,
    /// Unix milliseconds.
    pub fetched_at: u64,
}

impl LatexBundle {
    pub fn from_source(arxiv_id: impl Into<String>, main_source: impl Into<String>) -> Self {
        Self {
            arxiv_id: arxiv_id.into(),
            main_source: main_source.into(),
            bib_sources: Vec::new(),
            fetched_at: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationBatch {
    pub seed_id: String,
    pub papers: Vec<PaperRecord>,
    pub requested: usize,
}

impl RecommendationBatch {
    /// Build a batch enforcing its invariants: no duplicate ids, no seed, at
    /// most `requested` papers, upstream order otherwise preserved.
    pub fn new(seed_id: impl Into<String>, papers: Vec<PaperRecord>, requested: usize) -> Self {
        let seed_id = seed_id.into();
        let mut seen = std::collections::HashSet::new();
        let papers = papers
            .into_iter()
            .filter(|p| p.id != seed_id && seen.insert(p.id.clone()))
            .take(requested)
            .collect();
        Self {
            seed_id,
            papers,
            requested,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    /// Upper bound of the uniform jitter added to each backoff.
    pub jitter: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_secs(1),
            jitter: Duration::from_millis(250),
        }
    }
}

/// Cached, rate-limited, retrying GET/POST layer shared by the clients.
#[derive(Clone)]
pub struct Fetcher {
    transport: Arc<dyn Transport>,
    cache: Option<Arc<ResponseCache>>,
    limiter: Option<Arc<RateLimiter>>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    version: String,
}

impl std::fmt::Debug for Fetcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fetcher")
            .field("cache", &self.cache)
            .field("limiter", &self.limiter)
            .field("retry", &self.retry)
            .field("version", &self.version)
            .finish()
    }
}

impl Fetcher {
    pub fn new(transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        Self {
            transport,
            cache: None,
            limiter: None,
            clock,
            retry: RetryPolicy::default(),
            version: crate::PIPELINE_VERSION.to_string(),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_rate_limit(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_version(mut self, version: impl Into<String>) -> Self {
        self.version = version.into();
        self
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Fetch a successful response body. `endpoint` and `params` form the
    /// cache key; only 2xx bodies are cached.
    pub async fn fetch(
        &self,
        endpoint: &str,
        params: &[(&str, String)],
        request: HttpRequest,
    ) -> Result<Vec<u8>, IngestError> {
        let key = CacheKey::new(
            endpoint,
            params.iter().map(|(k, v)| (*k, v.clone())),
            &self.version,
        );
        if let Some(cache) = &self.cache {
            if let Ok(hit) = cache.get(&key) {
                return Ok(hit);
            }
        }

        let mut attempt = 0;
        let body = loop {
            attempt += 1;
            match self.send_once(request.clone()).await {
                Ok(body) => break body,
                Err(err) if err.is_transient() && attempt < self.retry.attempts => {
                    let backoff = self.retry.base_delay * 2u32.pow(attempt - 1);
                    let jitter = if self.retry.jitter.is_zero() {
                        Duration::ZERO
                    } else {
                        self.retry.jitter.mul_f64(rand::random::<f64>())
                    };
                    tracing::debug!(endpoint, attempt, %err, "retrying upstream request");
                    self.clock.sleep(backoff + jitter).await;
                }
                Err(err) => return Err(err),
            }
        };

        if let Some(cache) = &self.cache {
            if let Err(err) = cache.put(&key, &body) {
                tracing::warn!(%err, "failed to write cache entry");
            }
        }
        Ok(body)
    }

    async fn send_once(&self, request: HttpRequest) -> Result<Vec<u8>, IngestError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire().await;
        }
        let url = request.url.clone();
        let response = self
            .transport
            .send(request)
            .await
            .map_err(|e| IngestError::UpstreamUnavailable(e.to_string()))?;
        match response.status {
            200..=299 => Ok(response.body),
            404 => Err(IngestError::NotFound(url)),
            429 => Err(IngestError::RateLimited),
            400..=499 => Err(IngestError::BadRequest(format!(
                "HTTP {} for {url}",
                response.status
            ))),
            status => Err(IngestError::UpstreamUnavailable(format!(
                "HTTP {status} for {url}"
            ))),
        }
    }
}
