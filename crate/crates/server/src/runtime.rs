//! Assembling a [`Pipeline`] from command-line options.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use noveltrace::clock::{Clock, ManualClock, SystemClock};
use noveltrace::ingest::{
    ArxivClient, Fetcher, FixtureTransport, RateLimiter, ReqwestTransport, ResponseCache, ScholarClient, Transport,
};
use noveltrace::llm::{Gateway, MockProvider, PricingTable, Roster};
use noveltrace::pipeline::Pipeline;
use noveltrace::retrieval::{Embedder, HashingEmbedder, HttpEmbedder, DEFAULT_DIM};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct SetupError(pub String);

#[derive(Debug, Clone, Default)]
pub struct RuntimeOptions {
    /// Holds `reports/` and `http-cache/`.
    pub data_dir: PathBuf,
    /// Serve arXiv and Semantic Scholar from a recorded fixture directory.
    pub fixtures: Option<PathBuf>,
    /// Answer every model request with the deterministic mock.
    pub mock: bool,
    pub models: Option<PathBuf>,
    pub pricing: Option<PathBuf>,
    /// OpenAI-compatible embeddings endpoint; the offline hashing embedder
    /// is used when absent.
    pub embedding_url: Option<String>,
    pub s2_api_key: Option<String>,
    pub timeout: Duration,
}

impl RuntimeOptions {
    pub fn reports_dir(&self) -> PathBuf {
        self.data_dir.join("reports")
    }
}

pub fn build_pipeline(opts: &RuntimeOptions) -> Result<Pipeline, SetupError> {
    let err = |e: &dyn std::fmt::Display| SetupError(e.to_string());
    let live: Arc<dyn Transport> = Arc::new(ReqwestTransport::new(opts.timeout.max(Duration::from_secs(1))));

    // Fixture runs are hermetic: frozen clock, no cache, no throttling.
    let (arxiv_fetcher, s2_fetcher, clock): (Fetcher, Fetcher, Arc<dyn Clock>) = match &opts.fixtures {
        Some(dir) => {
            let clock: Arc<dyn Clock> = Arc::new(ManualClock::default());
            let t: Arc<dyn Transport> = Arc::new(FixtureTransport::from_dir(dir).map_err(|e| err(&e))?);
            let f = Fetcher::new(t, clock.clone());
            (f.clone(), f, clock)
        }
        None => {
            let clock: Arc<dyn Clock> = Arc::new(SystemClock);
            let cache = Arc::new(ResponseCache::open(opts.data_dir.join("http-cache"), clock.clone()).map_err(|e| err(&e))?);
            let base = Fetcher::new(live.clone(), clock.clone()).with_cache(cache);
            // arXiv asks for one request every three seconds
            let arxiv = base
                .clone()
                .with_rate_limit(Arc::new(RateLimiter::new(1, Duration::from_secs(3), clock.clone())));
            let s2 = base.with_rate_limit(Arc::new(RateLimiter::per_second(1, clock.clone())));
            (arxiv, s2, clock)
        }
    };

    let roster = match &opts.models {
        Some(p) => Roster::from_file(p).map_err(|e| err(&e))?,
        None => Roster::default(),
    };
    let pricing = match &opts.pricing {
        Some(p) => PricingTable::from_file(p).map_err(|e| err(&e))?,
        None => PricingTable::default(),
    };
    let mock = Arc::new(MockProvider::synthetic());
    let mut builder = Gateway::builder()
        .provider("mock", mock.clone())
        .roster(&roster, live.clone(), |k| std::env::var(k).ok())
        .pricing(pricing)
        .clock(clock.clone());
    if opts.mock {
        builder = builder.route_all_to("mock", mock);
    }
    let gateway = Arc::new(builder.build().map_err(|e| err(&e))?);

    let embedder: Arc<dyn Embedder> = match &opts.embedding_url {
        Some(url) => Arc::new(HttpEmbedder::new(live, url).with_api_key(std::env::var("EMBEDDING_API_KEY").ok())),
        None => Arc::new(HashingEmbedder::new(DEFAULT_DIM)),
    };

    Ok(Pipeline::new(
        ArxivClient::new(arxiv_fetcher),
        ScholarClient::new(s2_fetcher).with_api_key(opts.s2_api_key.clone()),
        gateway,
        embedder,
        clock,
    ))
}
