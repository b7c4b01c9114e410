//! The single network seam. Every upstream call (arXiv, Semantic Scholar,
//! model providers, embedding services) goes through a [`Transport`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: vec![("content-type".into(), "application/json".into())],
            body: Some(serde_json::to_vec(body).expect("json values always serialize")),
        }
    }

    pub fn header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("request timed out")]
    Timeout,
}

#[async_trait]
pub trait Transport: Send + Sync {
    async fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError>;
}

#[async_trait]
impl<T: Transport + ?Sized> Transport for Arc<T> {
    async fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request).await
    }
}

/// Live transport backed by `reqwest`.
#[derive(Debug, Clone)]
pub struct ReqwestTransport {
    client: reqwest::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("noveltrace/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("reqwest client configuration is static");
        Self { client }
    }
}

impl Default for ReqwestTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

#[async_trait]
impl Transport for ReqwestTransport {
    async fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name, value);
        }
        if let Some(body) = request.body {
            builder = builder.body(body);
        }
        let response = builder.send().await.map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Connect(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let body = response
            .bytes()
            .await
            .map_err(|e| TransportError::Connect(e.to_string()))?
            .to_vec();
        Ok(HttpResponse { status, body })
    }
}

/// Canonical route key: method, URL without query, and the sorted decoded
/// query pairs. Two URLs differing only in parameter order or percent-encoding
/// style map to the same key.
fn route_key(method: Method, raw_url: &str) -> (Method, String, Vec<(String, String)>) {
    match url::Url::parse(raw_url) {
        Ok(parsed) => {
            let mut pairs: Vec<(String, String)> = parsed
                .query_pairs()
                .map(|(k, v)| (k.into_owned(), v.into_owned()))
                .collect();
            pairs.sort();
            let mut base = parsed.clone();
            base.set_query(None);
            base.set_fragment(None);
            (method, base.to_string(), pairs)
        }
        Err(_) => (method, raw_url.to_string(), Vec::new()),
    }
}

#[derive(Debug, Deserialize)]
struct Manifest {
    routes: Vec<ManifestRoute>,
}

#[derive(Debug, Deserialize)]
struct ManifestRoute {
    #[serde(default = "default_method")]
    method: Method,
    url: String,
    #[serde(default = "default_status")]
    status: u16,
    #[serde(default)]
    body_file: Option<PathBuf>,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    json: Option<serde_json::Value>,
}

fn default_method() -> Method {
    Method::Get
}

fn default_status() -> u16 {
    200
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("reading fixture {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing fixture manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Replays recorded responses. Unknown routes fail as connection errors so a
/// missing fixture never passes silently. Every call is counted and logged.
#[derive(Debug, Default)]
pub struct FixtureTransport {
    routes: BTreeMap<(Method, String, Vec<(String, String)>), HttpResponse>,
    down: bool,
    calls: AtomicUsize,
    log: Mutex<Vec<String>>,
}

impl FixtureTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// A transport whose every request fails at the connection level.
    pub fn down() -> Self {
        Self {
            down: true,
            ..Self::default()
        }
    }

    /// Load `manifest.json` from `dir`. Each route names a status and either an
    /// inline `body`, an inline `json` value or a `body_file` relative to `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&manifest_path).map_err(|source| FixtureError::Io {
            path: manifest_path.clone(),
            source,
        })?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|source| FixtureError::Manifest {
                path: manifest_path.clone(),
                source,
            })?;
        let mut transport = Self::new();
        for route in manifest.routes {
            let body = if let Some(file) = &route.body_file {
                let path = dir.join(file);
                std::fs::read(&path).map_err(|source| FixtureError::Io { path, source })?
            } else if let Some(json) = &route.json {
                serde_json::to_vec(json).expect("json values always serialize")
            } else {
                route.body.clone().unwrap_or_default().into_bytes()
            };
            transport.insert(route.method, &route.url, route.status, body);
        }
        Ok(transport)
    }

    pub fn insert(&mut self, method: Method, url: &str, status: u16, body: Vec<u8>) {
        self.routes
            .insert(route_key(method, url), HttpResponse { status, body });
    }

    pub fn route(mut self, method: Method, url: &str, status: u16, body: impl Into<Vec<u8>>) -> Self {
        self.insert(method, url, status, body.into());
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// URLs requested so far, in call order.
    pub fn log(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

#[async_trait]
impl Transport for FixtureTransport {
    async fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(request.url.clone());
        if self.down {
            return Err(TransportError::Connect("upstream down (fixture)".into()));
        }
        self.routes
            .get(&route_key(request.method, &request.url))
            .cloned()
            .ok_or_else(|| {
                TransportError::Connect(format!(
                    "no fixture recorded for {:?} {}",
                    request.method, request.url
                ))
            })
    }
}
