//! REST and SSE routes.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use noveltrace::ingest::{IngestError, MAX_SEARCH_LIMIT};
use noveltrace::pipeline::{EvaluationResult, EvaluationSettings, Pipeline, PipelineError, ProgressEvent, Stage};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{mpsc, Semaphore};
use tokio_util::sync::CancellationToken;

use crate::store::{abstract_key, arxiv_key, ReportStore, ReportSummary};

pub const DEFAULT_MAX_CONCURRENT: usize = 2;
pub const DEFAULT_SEARCH_LIMIT: usize = 10;
pub const EVALUATION_ID_HEADER: &str = "x-evaluation-id";

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    pipeline: Pipeline,
    store: ReportStore,
    permits: Arc<Semaphore>,
    capacity: usize,
    running: Mutex<HashMap<String, CancellationToken>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(pipeline: Pipeline, store: ReportStore) -> Self {
        Self::with_capacity(pipeline, store, DEFAULT_MAX_CONCURRENT)
    }

    /// `capacity` bounds evaluations running at once; later ones wait.
    pub fn with_capacity(pipeline: Pipeline, store: ReportStore, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            inner: Arc::new(Inner {
                pipeline,
                store,
                permits: Arc::new(Semaphore::new(capacity)),
                capacity,
                running: Mutex::new(HashMap::new()),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    pub fn store(&self) -> &ReportStore {
        &self.inner.store
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.inner.pipeline
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/search", get(search))
        .route("/evaluate", post(evaluate))
        .route("/abstract", post(evaluate_abstract))
        .route("/library", get(library))
        .route("/report/{key}", get(report))
        .route("/cancel/{id}", post(cancel))
        .route("/config", get(config))
        .with_state(state)
}

/// JSON error body `{"error": "..."}` with a status code.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let status = match &e {
            IngestError::EmptyQuery | IngestError::BadRequest(_) | IngestError::BadId(_) => StatusCode::BAD_REQUEST,
            IngestError::NotFound(_) => StatusCode::NOT_FOUND,
            IngestError::RateLimited => StatusCode::TOO_MANY_REQUESTS,
            IngestError::SourceUnavailable(_) | IngestError::UpstreamUnavailable(_) => StatusCode::BAD_GATEWAY,
        };
        ApiError(status, e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Invalid(m) => bad_request(m),
            PipelineError::Ingest { source, stage } => {
                let ApiError(status, msg) = source.into();
                ApiError(status, format!("{stage}: {msg}"))
            }
            PipelineError::Failed { .. } => ApiError(StatusCode::BAD_GATEWAY, e.to_string()),
            PipelineError::Cancelled => ApiError(StatusCode::CONFLICT, e.to_string()),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    #[serde(default)]
    pub q: String,
    pub limit: Option<usize>,
}

async fn search(
    State(state): State<AppState>,
    Query(params): Query<SearchParams>,
) -> Result<Json<Vec<noveltrace::ingest::PaperRecord>>, ApiError> {
    let limit = params.limit.unwrap_or(DEFAULT_SEARCH_LIMIT);
    if params.q.trim().is_empty() {
        return Err(IngestError::EmptyQuery.into());
    }
    if limit == 0 || limit > MAX_SEARCH_LIMIT {
        return Err(bad_request(format!("limit must be in 1..={MAX_SEARCH_LIMIT}")));
    }
    Ok(Json(state.pipeline().arxiv().search(&params.q, limit).await?))
}

/// Body of `POST /evaluate`. Omitted knobs take the documented defaults.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateRequest {
    pub arxiv_id: String,
    /// Display title from the search result; informational.
    pub title: String,
    pub k_citations: usize,
    pub k_recommended: usize,
    pub k_related: usize,
    pub model_id: String,
    pub filter_by_date: bool,
    pub k_samples: usize,
}

impl Default for EvaluateRequest {
    fn default() -> Self {
        let s = EvaluationSettings::default();
        Self {
            arxiv_id: String::new(),
            title: String::new(),
            k_citations: s.k_citations,
            k_recommended: s.k_recommended,
            k_related: s.k_related,
            model_id: s.model_id,
            filter_by_date: s.filter_by_date,
            k_samples: s.k_samples,
        }
    }
}

impl EvaluateRequest {
    pub fn settings(&self) -> EvaluationSettings {
        EvaluationSettings {
            k_citations: self.k_citations,
            k_recommended: self.k_recommended,
            k_related: self.k_related,
            k_samples: self.k_samples,
            filter_by_date: self.filter_by_date,
            model_id: self.model_id.clone(),
            ..Default::default()
        }
    }

    pub fn cache_key(&self) -> String {
        arxiv_key(self.arxiv_id.trim(), &self.title, &self.settings())
    }
}

/// Data of the terminal `done` frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoneEvent {
    #[serde(flatten)]
    pub event: ProgressEvent,
    /// True when the report was replayed from the store.
    pub cached: bool,
    pub key: String,
    pub result: EvaluationResult,
}

/// One server-sent frame before encoding.
#[derive(Debug, Clone)]
pub enum Frame {
    Progress(ProgressEvent),
    Done(Box<DoneEvent>),
    /// `error` or `cancelled`.
    Terminal(ProgressEvent),
}

impl Frame {
    fn to_event(&self) -> Event {
        let (name, data) = match self {
            Frame::Progress(e) => ("progress", serde_json::to_string(e)),
            Frame::Done(d) => ("done", serde_json::to_string(d)),
            Frame::Terminal(e) => (e.stage.as_str(), serde_json::to_string(e)),
        };
        Event::default().event(name).data(data.expect("frames serialize"))
    }
}

/// Cancels the evaluation when the client goes away before it finished.
struct CancelOnDrop(CancellationToken);

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        self.0.cancel();
    }
}

fn frames(rx: mpsc::UnboundedReceiver<Frame>, guard: Option<CancelOnDrop>) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::unfold((rx, guard), |(mut rx, guard)| async move {
        let frame = rx.recv().await?;
        Some((Ok(frame.to_event()), (rx, guard)))
    })
}

fn with_id(id: &str, body: impl IntoResponse) -> Response {
    let mut resp = body.into_response();
    resp.headers_mut()
        .insert(EVALUATION_ID_HEADER, HeaderValue::from_str(id).expect("ids are ascii"));
    resp
}

async fn evaluate(State(state): State<AppState>, Json(req): Json<EvaluateRequest>) -> Result<Response, ApiError> {
    let arxiv_id = req.arxiv_id.trim().to_string();
    if !noveltrace::ingest::is_valid_arxiv_id(&arxiv_id) {
        return Err(bad_request(format!("malformed arXiv identifier {arxiv_id:?}")));
    }
    let settings = state.pipeline().resolve(&req.settings())?;
    let key = req.cache_key();
    let clock = state.pipeline().clock().clone();
    let (tx, rx) = mpsc::unbounded_channel();

    if let Some(result) = state.store().get(&key).await {
        let event = ProgressEvent::terminal(&Ok::<_, PipelineError>(()), 100.0, clock.now_millis());
        let _ = tx.send(Frame::Done(Box::new(DoneEvent {
            event: ProgressEvent {
                message: "Loaded from cache".into(),
                ..event
            },
            cached: true,
            key,
            result,
        })));
        drop(tx);
        return Ok(with_id("cached", Sse::new(frames(rx, None))));
    }

    let id = format!("ev-{}", state.inner.next_id.fetch_add(1, Ordering::Relaxed));
    let cancel = CancellationToken::new();
    state.inner.running.lock().unwrap().insert(id.clone(), cancel.clone());

    let task_state = state.clone();
    let task_id = id.clone();
    let task_cancel = cancel.clone();
    tokio::spawn(async move {
        let state = task_state;
        let last = Arc::new(Mutex::new(0.0f64));
        let outcome = {
            let _permit = tokio::select! {
                p = state.inner.permits.clone().acquire_owned() => p.ok(),
                _ = task_cancel.cancelled() => None,
            };
            if task_cancel.is_cancelled() {
                Err(PipelineError::Cancelled)
            } else {
                let sink_tx = tx.clone();
                let sink_last = last.clone();
                let sink = move |e: ProgressEvent| {
                    *sink_last.lock().unwrap() = e.percent;
                    let _ = sink_tx.send(Frame::Progress(e));
                };
                state.pipeline().evaluate_arxiv(&arxiv_id, &settings, &sink, &task_cancel).await
            }
        };
        let outcome = match outcome {
            Ok(_) if task_cancel.is_cancelled() => Err(PipelineError::Cancelled),
            other => other,
        };
        let terminal = ProgressEvent::terminal(&outcome, *last.lock().unwrap(), clock.now_millis());
        match outcome {
            Ok(result) => {
                if let Err(e) = state.store().put(&key, &result).await {
                    tracing::error!(key, "could not persist report: {e}");
                }
                let _ = tx.send(Frame::Done(Box::new(DoneEvent {
                    event: terminal,
                    cached: false,
                    key,
                    result,
                })));
            }
            Err(e) => {
                tracing::warn!(id = %task_id, "evaluation ended: {e}");
                let _ = tx.send(Frame::Terminal(terminal));
            }
        }
        state.inner.running.lock().unwrap().remove(&task_id);
    });

    let stream = frames(rx, Some(CancelOnDrop(cancel)));
    Ok(with_id(&id, Sse::new(stream).keep_alive(KeepAlive::default())))
}

/// Body of `POST /abstract`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct AbstractRequest {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub k_recommended: usize,
    pub k_related: usize,
    pub model_id: String,
    pub k_samples: usize,
}

impl Default for AbstractRequest {
    fn default() -> Self {
        let s = EvaluationSettings::default();
        Self {
            title: String::new(),
            abstract_text: String::new(),
            k_recommended: s.k_recommended,
            k_related: s.k_related,
            model_id: s.model_id,
            k_samples: s.k_samples,
        }
    }
}

impl AbstractRequest {
    pub fn settings(&self) -> EvaluationSettings {
        EvaluationSettings {
            k_recommended: self.k_recommended,
            k_related: self.k_related,
            k_samples: self.k_samples,
            model_id: self.model_id.clone(),
            // no publication year to compare against
            filter_by_date: false,
            ..Default::default()
        }
    }

    pub fn cache_key(&self) -> String {
        abstract_key(self.title.trim(), self.abstract_text.trim(), &self.settings())
    }
}

async fn evaluate_abstract(
    State(state): State<AppState>,
    Json(req): Json<AbstractRequest>,
) -> Result<Json<EvaluationResult>, ApiError> {
    if req.title.trim().is_empty() || req.abstract_text.trim().is_empty() {
        return Err(bad_request("title and abstract must both be nonempty"));
    }
    let settings = state.pipeline().resolve(&req.settings())?;
    let key = req.cache_key();
    if let Some(result) = state.store().get(&key).await {
        return Ok(Json(result));
    }
    let _permit = state.inner.permits.clone().acquire_owned().await.expect("semaphore is never closed");
    let result = state
        .pipeline()
        .evaluate_abstract(&req.title, &req.abstract_text, &settings, &|_| {}, &CancellationToken::new())
        .await?;
    if let Err(e) = state.store().put(&key, &result).await {
        tracing::error!(key, "could not persist report: {e}");
    }
    Ok(Json(result))
}

async fn library(State(state): State<AppState>) -> Json<Vec<ReportSummary>> {
    Json(state.store().summaries().await)
}

async fn report(State(state): State<AppState>, Path(key): Path<String>) -> Result<Response, ApiError> {
    match state.store().get_bytes(&key).await {
        Some(bytes) => Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response()),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("no report {key}"))),
    }
}

async fn cancel(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.inner.running.lock().unwrap().get(&id) {
        Some(token) => {
            token.cancel();
            Ok(StatusCode::ACCEPTED)
        }
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("no running evaluation {id}"))),
    }
}

/// Defaults and choices for the configuration panel.
async fn config(State(state): State<AppState>) -> Json<serde_json::Value> {
    let gateway = state.pipeline().gateway();
    Json(json!({
        "defaults": EvaluateRequest {
            model_id: gateway.default_model().unwrap_or_default().to_string(),
            ..Default::default()
        },
        "models": gateway.models().collect::<Vec<_>>(),
        "max_concurrent": state.inner.capacity,
        "stages": Stage::ORDER,
    }))
}
