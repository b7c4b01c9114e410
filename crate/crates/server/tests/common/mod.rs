#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use noveltrace::clock::ManualClock;
use noveltrace::ingest::{ArxivClient, Fetcher, FixtureTransport, ScholarClient, Transport};
use noveltrace::llm::{Completion, Gateway, MockProvider, Provider, ProviderCall, ProviderError, Roster};
use noveltrace::pipeline::Pipeline;
use noveltrace::retrieval::{HashingEmbedder, DEFAULT_DIM};
use noveltrace_server::{AppState, ReportStore};
use serde_json::Value;
use tower::ServiceExt;

pub const PAPERS: [&str; 2] = ["2401.01234", "2402.05678"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn transport() -> Arc<dyn Transport> {
    Arc::new(FixtureTransport::from_dir(fixtures().join("transport")).unwrap())
}

pub fn pipeline_with(transport: Arc<dyn Transport>, provider: Arc<dyn Provider>) -> Pipeline {
    let clock = Arc::new(ManualClock::default());
    let roster = Roster::default();
    let mut b = Gateway::builder().clock(clock.clone());
    for m in &roster.models {
        b = b.model(&m.id, "mock");
    }
    let gateway = b
        .route_all_to("mock", provider)
        .default_model(&roster.default_model)
        .build()
        .unwrap();
    let fetcher = Fetcher::new(transport, clock.clone());
    Pipeline::new(
        ArxivClient::new(fetcher.clone()),
        ScholarClient::new(fetcher),
        Arc::new(gateway),
        Arc::new(HashingEmbedder::new(DEFAULT_DIM)),
        clock,
    )
}

pub fn state_with(provider: Arc<dyn Provider>, dir: &Path, capacity: usize) -> AppState {
    AppState::with_capacity(
        pipeline_with(transport(), provider),
        ReportStore::open(dir).unwrap(),
        capacity,
    )
}

pub fn state(dir: &Path) -> AppState {
    state_with(Arc::new(MockProvider::synthetic()), dir, 2)
}

/// Holds every call on one schema until released; everything else passes
/// straight through to the synthetic mock.
pub struct Gate {
    inner: MockProvider,
    schema: &'static str,
    pub entered: AtomicUsize,
    release: tokio::sync::Semaphore,
}

impl Gate {
    pub fn new(schema: &'static str) -> Arc<Self> {
        Arc::new(Self {
            inner: MockProvider::synthetic(),
            schema,
            entered: AtomicUsize::new(0),
            release: tokio::sync::Semaphore::new(0),
        })
    }

    pub fn entered(&self) -> usize {
        self.entered.load(Ordering::SeqCst)
    }

    pub fn open(&self, n: usize) {
        self.release.add_permits(n);
    }

    pub async fn wait_entered(&self, n: usize) {
        tokio::time::timeout(Duration::from_secs(10), async {
            while self.entered() < n {
                tokio::time::sleep(Duration::from_millis(5)).await;
            }
        })
        .await
        .unwrap_or_else(|_| panic!("only {} of {n} calls reached the gate", self.entered()));
    }
}

#[async_trait]
impl Provider for Gate {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<Completion, ProviderError> {
        if call.request.schema_id.as_deref() == Some(self.schema) {
            self.entered.fetch_add(1, Ordering::SeqCst);
            self.release.acquire().await.unwrap().forget();
        }
        self.inner.complete(call).await
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub fn post(uri: &str, body: &Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

/// `(event name, data)` for every frame; keep-alive comments are ignored.
pub fn sse_frames(body: &[u8]) -> Vec<(String, Value)> {
    let text = std::str::from_utf8(body).unwrap();
    let mut out = Vec::new();
    for block in text.split("\n\n").filter(|b| !b.trim().is_empty()) {
        let mut name = "message".to_string();
        let mut data = Vec::new();
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                name = v.trim_start().to_string();
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        if !data.is_empty() {
            out.push((name, serde_json::from_str(&data.join("\n")).unwrap()));
        }
    }
    out
}

pub fn stages(frames: &[(String, Value)]) -> Vec<String> {
    frames.iter().map(|(_, d)| d["stage"].as_str().unwrap().to_string()).collect()
}

pub const CANONICAL: [&str; 7] = [
    "fetch_paper",
    "parse",
    "extract_graph",
    "fetch_related",
    "classify",
    "assess",
    "done",
];

/// Compare with a checked-in golden file, rewriting it under `UPDATE_GOLDEN=1`.
pub fn golden(name: &str, actual: &[u8]) {
    let path = fixtures().join("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let want = std::fs::read(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1 to create)", path.display()));
    if want != actual {
        panic!(
            "{} differs from the golden file ({} vs {} bytes)\n--- got ---\n{}",
            path.display(),
            actual.len(),
            want.len(),
            String::from_utf8_lossy(&actual[..actual.len().min(2000)])
        );
    }
}

pub fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).unwrap();
    s.push(b'\n');
    s
}
