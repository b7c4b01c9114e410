#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use noveltrace::clock::ManualClock;
use noveltrace::ingest::{ArxivClient, Fetcher, FixtureTransport, ScholarClient};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read_json<T: serde::de::DeserializeOwned>(rel: &str) -> T {
    let path = fixtures().join(rel);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

pub fn transport() -> Arc<FixtureTransport> {
    Arc::new(FixtureTransport::from_dir(fixtures().join("transport")).unwrap())
}

pub fn clients() -> (ArxivClient, ScholarClient) {
    let fetcher = Fetcher::new(transport(), Arc::new(ManualClock::default()));
    (ArxivClient::new(fetcher.clone()), ScholarClient::new(fetcher))
}

pub fn gateway(mock: Arc<noveltrace::llm::MockProvider>) -> Arc<noveltrace::llm::Gateway> {
    use noveltrace::llm::{Gateway, Roster};
    let roster = Roster::default();
    let mut b = Gateway::builder().clock(Arc::new(ManualClock::default()));
    for m in &roster.models {
        b = b.model(&m.id, "mock");
    }
    Arc::new(b.route_all_to("mock", mock).default_model(&roster.default_model).build().unwrap())
}

pub fn pipeline(mock: Arc<noveltrace::llm::MockProvider>) -> noveltrace::pipeline::Pipeline {
    use noveltrace::retrieval::{HashingEmbedder, DEFAULT_DIM};
    let clock = Arc::new(ManualClock::default());
    let fetcher = Fetcher::new(transport(), clock.clone());
    noveltrace::pipeline::Pipeline::new(
        ArxivClient::new(fetcher.clone()),
        ScholarClient::new(fetcher),
        gateway(mock),
        Arc::new(HashingEmbedder::new(DEFAULT_DIM)),
        clock,
    )
}
