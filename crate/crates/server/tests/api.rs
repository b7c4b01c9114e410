mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use common::*;
use http_body_util::BodyExt;
use noveltrace::ingest::FixtureTransport;
use noveltrace::llm::schema;
use noveltrace::pipeline::EvaluationResult;
use noveltrace::PIPELINE_VERSION;
use noveltrace_server::store::{arxiv_key, arxiv_key_versioned};
use noveltrace_server::{router, AppState, EvaluateRequest, ReportStore, EVALUATION_ID_HEADER};
use proptest::prelude::*;
use serde_json::{json, Value};
use tower::ServiceExt;

/// Title and abstract of the first fixture paper, via the search route.
async fn fixture_abstract(app: &axum::Router) -> (Value, Value) {
    let (_, _, body) = send(app, get("/search?q=sparse%20routing%20transformers")).await;
    let hit = json(&body)[0].clone();
    (hit["title"].clone(), hit["abstract"].clone())
}

fn eval_body(id: &str) -> Value {
    json!({"arxiv_id": id})
}

async fn wait_finished(app: &axum::Router, id: &str) {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let (status, _, _) = send(app, post(&format!("/cancel/{id}"), &json!({}))).await;
        if status == StatusCode::NOT_FOUND {
            return;
        }
        assert!(Instant::now() < deadline, "{id} never finished");
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
}

#[tokio::test]
async fn search_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path()));

    let (status, _, body) = send(&app, get("/search?q=sparse%20routing%20transformers")).await;
    assert_eq!(status, StatusCode::OK);
    let hits = json(&body);
    let titles: Vec<&str> = hits.as_array().unwrap().iter().map(|h| h["title"].as_str().unwrap()).collect();
    assert_eq!(titles[0], "Sparse Routing Transformers for Citation Graphs");

    for uri in ["/search?q=", "/search?q=%20%20", "/search", "/search?q=x&limit=0", "/search?q=x&limit=1000"] {
        let (status, _, body) = send(&app, get(uri)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(json(&body)["error"].is_string());
    }

    let down = AppState::new(
        pipeline_with(Arc::new(FixtureTransport::down()), Arc::new(noveltrace::llm::MockProvider::synthetic())),
        ReportStore::open(dir.path()).unwrap(),
    );
    let (status, _, _) = send(&router(down), get("/search?q=anything")).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
}

#[tokio::test]
async fn evaluate_streams_the_canonical_stages_and_matches_golden() {
    for id in PAPERS {
        let dir = tempfile::tempdir().unwrap();
        let app = router(state(dir.path()));
        let (status, headers, body) = send(&app, post("/evaluate", &eval_body(id))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(headers["content-type"], "text/event-stream");
        assert!(headers[EVALUATION_ID_HEADER].to_str().unwrap().starts_with("ev-"));

        let frames = sse_frames(&body);
        assert_eq!(stages(&frames), CANONICAL, "{id}");
        let names: Vec<&str> = frames.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names[..6], ["progress"; 6]);
        assert_eq!(names[6], "done");
        let percents: Vec<f64> = frames.iter().map(|(_, d)| d["percent"].as_f64().unwrap()).collect();
        assert!(percents.windows(2).all(|w| w[0] <= w[1]), "{percents:?}");
        assert_eq!(percents.last(), Some(&100.0));

        let done = &frames[6].1;
        assert_eq!(done["cached"], false);
        let result: EvaluationResult = serde_json::from_value(done["result"].clone()).unwrap();
        assert_eq!(result.paper.arxiv_id.as_deref(), Some(id));
        assert!(result.graph.is_some());
        assert!(!result.related.is_empty());

        // the report is persisted under the announced key
        let key = done["key"].as_str().unwrap();
        let (status, _, stored) = send(&app, get(&format!("/report/{key}"))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(json(&stored), done["result"]);

        golden(&format!("evaluate_{id}.sse"), &body);
        golden(&format!("report_{id}.json"), &pretty(&done["result"]));
    }
}

#[tokio::test]
async fn evaluate_is_byte_stable_across_runs() {
    let mut bodies = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let (_, _, body) = send(&router(state(dir.path())), post("/evaluate", &eval_body(PAPERS[1]))).await;
        bodies.push(body);
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[tokio::test]
async fn repeat_request_replays_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mock = Arc::new(noveltrace::llm::MockProvider::synthetic());
    let app = router(state_with(mock.clone(), dir.path(), 2));
    let (_, _, first) = send(&app, post("/evaluate", &eval_body(PAPERS[0]))).await;
    let calls = mock.call_count();

    let (status, headers, second) = send(&app, post("/evaluate", &eval_body(PAPERS[0]))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[EVALUATION_ID_HEADER], "cached");
    assert_eq!(mock.call_count(), calls, "a cache hit makes no model calls");
    let frames = sse_frames(&second);
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].0, "done");
    assert_eq!(frames[0].1["cached"], true);
    assert_eq!(frames[0].1["percent"], 100.0);
    let original = sse_frames(&first).pop().unwrap().1;
    assert_eq!(frames[0].1["result"], original["result"]);
    assert_eq!(frames[0].1["key"], original["key"]);

    // different settings are a different entry
    let (_, _, third) = send(&app, post("/evaluate", &json!({"arxiv_id": PAPERS[0], "k_related": 3}))).await;
    assert_eq!(sse_frames(&third).len(), 7);
}

#[tokio::test]
async fn cancel_during_graph_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let gate = Gate::new(schema::PAPER_GRAPH);
    let app = router(state_with(gate.clone(), dir.path(), 2));

    let resp = app.clone().oneshot(post("/evaluate", &eval_body(PAPERS[0]))).await.unwrap();
    let id = resp.headers()[EVALUATION_ID_HEADER].to_str().unwrap().to_string();
    let body = tokio::spawn(async move { resp.into_body().collect().await.unwrap().to_bytes() });

    gate.wait_entered(1).await;
    let (status, _, _) = send(&app, post(&format!("/cancel/{id}"), &json!({}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);

    let frames = sse_frames(&body.await.unwrap());
    let st = stages(&frames);
    assert_eq!(st, ["fetch_paper", "parse", "extract_graph", "cancelled"]);
    assert_eq!(frames.last().unwrap().0, "cancelled");
    assert_eq!(frames.last().unwrap().1["percent"], 30.0);

    wait_finished(&app, &id).await;
    let (_, _, lib) = send(&app, get("/library")).await;
    assert_eq!(json(&lib), json!([]));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "nothing persisted");

    let (status, _, _) = send(&app, post("/cancel/ev-999", &json!({}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn client_disconnect_cancels() {
    let dir = tempfile::tempdir().unwrap();
    let gate = Gate::new(schema::PAPER_GRAPH);
    let app = router(state_with(gate.clone(), dir.path(), 2));

    let resp = app.clone().oneshot(post("/evaluate", &eval_body(PAPERS[0]))).await.unwrap();
    let id = resp.headers()[EVALUATION_ID_HEADER].to_str().unwrap().to_string();
    let mut body = resp.into_body();
    let first = body.frame().await.unwrap().unwrap().into_data().unwrap();
    assert!(std::str::from_utf8(&first).unwrap().contains("fetch_paper"));
    gate.wait_entered(1).await;
    drop(body);

    wait_finished(&app, &id).await;
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[tokio::test]
async fn concurrent_evaluations_are_capped() {
    let dir = tempfile::tempdir().unwrap();
    let gate = Gate::new(schema::PAPER_GRAPH);
    let app = router(state_with(gate.clone(), dir.path(), 2));

    let mut bodies = Vec::new();
    for k in 1..=3 {
        let resp = app
            .clone()
            .oneshot(post("/evaluate", &json!({"arxiv_id": PAPERS[0], "k_related": k})))
            .await
            .unwrap();
        bodies.push(tokio::spawn(async move { resp.into_body().collect().await.unwrap().to_bytes() }));
    }
    gate.wait_entered(2).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    assert_eq!(gate.entered(), 2, "a third evaluation started past the cap");

    gate.open(1);
    gate.wait_entered(3).await;
    gate.open(2);
    for b in bodies {
        let frames = sse_frames(&b.await.unwrap());
        assert_eq!(stages(&frames), CANONICAL);
    }
}

#[tokio::test]
async fn stage_failure_is_a_terminal_error_event() {
    let dir = tempfile::tempdir().unwrap();
    let mock = Arc::new(noveltrace::llm::MockProvider::synthetic());
    let fatal = noveltrace::llm::Step::Fatal("provider exploded".into());
    mock.script(schema::PAPER_GRAPH, vec![fatal; 3]);
    let app = router(state_with(mock, dir.path(), 2));
    let (_, _, body) = send(&app, post("/evaluate", &eval_body(PAPERS[0]))).await;
    let frames = sse_frames(&body);
    assert_eq!(stages(&frames), ["fetch_paper", "parse", "extract_graph", "error"]);
    let (name, data) = frames.last().unwrap();
    assert_eq!(name, "error");
    assert_eq!(data["failed_stage"], "extract_graph");
    assert!(data["message"].as_str().unwrap().contains("provider exploded"), "{data}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    // unknown paper: the stream still ends with exactly one terminal event
    let (_, _, body) = send(&app, post("/evaluate", &eval_body("2501.99999"))).await;
    assert_eq!(stages(&sse_frames(&body)), ["fetch_paper", "error"]);
}

#[tokio::test]
async fn evaluate_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path()));
    for body in [
        json!({"arxiv_id": "not an id"}),
        json!({"arxiv_id": PAPERS[0], "k_citations": 0}),
        json!({"arxiv_id": PAPERS[0], "k_related": 51}),
        json!({"arxiv_id": PAPERS[0], "model_id": "no-such-model"}),
    ] {
        let (status, _, resp) = send(&app, post("/evaluate", &body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(json(&resp)["error"].is_string());
    }
}

#[tokio::test]
async fn abstract_route_uses_semantic_evidence_only() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path()));
    let (title, abstract_text) = fixture_abstract(&app).await;
    let body = json!({"title": title, "abstract": abstract_text});
    let (status, _, resp) = send(&app, post("/abstract", &body)).await;
    assert_eq!(status, StatusCode::OK);
    let result = json(&resp);
    assert!(result["graph"].is_null());
    let related = result["related"].as_array().unwrap();
    assert!(!related.is_empty());
    assert!(related.iter().all(|r| r["source"] == "semantic"), "{related:?}");
    assert_eq!(result["paper"]["title"], title);
    golden("abstract_2401.01234.json", &pretty(&result));

    // replayed from the store
    let (_, _, again) = send(&app, post("/abstract", &body)).await;
    assert_eq!(json(&again), result);

    for bad in [json!({"title": "x", "abstract": "  "}), json!({"title": "", "abstract": "y"})] {
        let (status, _, _) = send(&app, post("/abstract", &bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
    }
}

#[tokio::test]
async fn library_lists_stored_reports() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path()));
    let (status, _, body) = send(&app, get("/library")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body), json!([]));

    for id in PAPERS {
        send(&app, post("/evaluate", &eval_body(id))).await;
    }
    let (title, abstract_text) = fixture_abstract(&app).await;
    let (status, _, _) = send(&app, post("/abstract", &json!({"title": title, "abstract": abstract_text, "k_related": 4}))).await;
    assert_eq!(status, StatusCode::OK);
    std::fs::write(dir.path().join("deadbeef.json"), b"{ not json").unwrap();

    let (_, _, body) = send(&app, get("/library")).await;
    let lib = json(&body);
    let items = lib.as_array().unwrap();
    assert_eq!(items.len(), 3, "{lib}");
    let titles: Vec<&str> = items.iter().map(|s| s["title"].as_str().unwrap()).collect();
    let mut sorted = titles.clone();
    sorted.sort();
    assert_eq!(titles, sorted);
    for s in items {
        assert!(s["abstract"].as_str().is_some_and(|a| !a.is_empty()));
        let score = s["score"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&score));
        let (status, _, _) = send(&app, get(&format!("/report/{}", s["key"].as_str().unwrap()))).await;
        assert_eq!(status, StatusCode::OK);
    }
    assert_eq!(items.iter().filter(|s| s["abstract_only"] == true).count(), 1);
}

#[tokio::test]
async fn report_and_config_routes() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path()));
    assert_eq!(send(&app, get("/report/nope")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, get("/report/..%2Fetc")).await.0, StatusCode::NOT_FOUND);

    let (status, _, body) = send(&app, get("/config")).await;
    assert_eq!(status, StatusCode::OK);
    let cfg = json(&body);
    assert_eq!(
        cfg["defaults"],
        json!({"arxiv_id": "", "title": "", "k_citations": 20, "k_recommended": 30, "k_related": 10,
               "model_id": "gemini-2.0-flash", "filter_by_date": true, "k_samples": 5})
    );
    assert_eq!(cfg["max_concurrent"], 2);
    assert!(cfg["models"].as_array().unwrap().iter().any(|m| m == "gemini-2.0-flash"));
    assert_eq!(cfg["stages"].as_array().unwrap().len(), 6);
}

fn request_strategy() -> impl Strategy<Value = EvaluateRequest> {
    (
        prop::sample::select(vec!["2401.01234", "2402.05678", "2401.01235"]),
        prop::sample::select(vec!["", "A", "B"]),
        1usize..4,
        1usize..4,
        1usize..4,
        prop::sample::select(vec!["", "gemini-2.0-flash", "gpt-4o"]),
        any::<bool>(),
        1usize..4,
    )
        .prop_map(|(id, title, kc, kr, kl, model, f, ks)| EvaluateRequest {
            arxiv_id: id.into(),
            title: title.into(),
            k_citations: kc,
            k_recommended: kr,
            k_related: kl,
            model_id: model.into(),
            filter_by_date: f,
            k_samples: ks,
        })
}

proptest! {
    #[test]
    fn cache_keys_separate_distinct_requests(a in request_strategy(), b in request_strategy()) {
        prop_assert_eq!(a == b, a.cache_key() == b.cache_key());
        let key = |r: &EvaluateRequest, v: &str| arxiv_key_versioned(&r.arxiv_id, &r.title, &r.settings(), v);
        prop_assert_eq!(key(&a, PIPELINE_VERSION), arxiv_key(&a.arxiv_id, &a.title, &a.settings()));
        prop_assert_ne!(key(&a, PIPELINE_VERSION), key(&a, "noveltrace-pipeline/2;prompts/1"));
    }
}
