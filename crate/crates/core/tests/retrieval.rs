mod common;

use std::sync::Arc;

use noveltrace::ingest::{FixtureTransport, Method, PaperRecord, RecommendationBatch};
use noveltrace::llm::{schema, Gateway, LlmSession, MockProvider, Step};
use noveltrace::retrieval::*;
use noveltrace::texparse::{CitationContext, Position};
use proptest::prelude::*;
use serde::Deserialize;
use serde_json::json;

fn session(mock: Arc<MockProvider>) -> LlmSession {
    Arc::new(Gateway::builder().provider("mock", mock).model("mock", "mock").build().unwrap())
        .session("mock")
        .unwrap()
}

fn synthetic() -> LlmSession {
    session(Arc::new(MockProvider::synthetic()))
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap()
}

fn dot(u: &EmbeddingVector, v: &EmbeddingVector) -> f64 {
    u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum()
}

/// The library similarity, cross-checked against a plain dot product of the
/// unit vectors.
fn sim(u: &EmbeddingVector, v: &EmbeddingVector) -> f64 {
    let s = cosine(u, v).unwrap();
    assert!((s - dot(u, v)).abs() < 1e-12);
    s
}

/// Similarities tie when equal to nine decimal places.
fn nano(s: f64) -> i64 {
    (s * 1e9).round() as i64
}

/// Top-k by rank, where a candidate's rank is the number of candidates that
/// strictly beat it (higher similarity, or tied similarity and smaller id).
fn rank_oracle(scored: &[(String, f64)], k: usize) -> Vec<(String, f64)> {
    let mut ranked: Vec<(usize, &(String, f64))> = scored
        .iter()
        .map(|c| {
            let beaten_by = scored
                .iter()
                .filter(|o| nano(o.1) > nano(c.1) || (nano(o.1) == nano(c.1) && o.0 < c.0))
                .count();
            (beaten_by, c)
        })
        .filter(|(r, _)| *r < k)
        .collect();
    ranked.sort_by_key(|(r, _)| *r);
    ranked.into_iter().map(|(_, c)| c.clone()).collect()
}

fn assert_same_ranking(got: &[(String, f64)], want: &[(String, f64)]) {
    let ids = |v: &[(String, f64)]| v.iter().map(|c| c.0.clone()).collect::<Vec<_>>();
    assert_eq!(ids(got), ids(want));
    for (g, w) in got.iter().zip(want) {
        assert!((g.1 - w.1).abs() < 1e-12, "{} {} vs {}", g.0, g.1, w.1);
    }
}

#[derive(Deserialize)]
struct Pool {
    name: String,
    k: usize,
    main: PaperRecord,
    cited: Vec<PaperRecord>,
}

#[derive(Deserialize)]
struct Batch {
    name: String,
    k: usize,
    cutoff_year: i32,
    main_abstract: String,
    papers: Vec<PaperRecord>,
}

// ---------------------------------------------------------------- embeddings

#[test]
fn hashing_embedder_basics() {
    let e = HashingEmbedder::default();
    let a = e.vector("sparse attention for graph transformers").unwrap();
    assert_eq!(a, e.vector("sparse attention for graph transformers").unwrap());
    assert_eq!(a.dim(), 384);
    assert!((a.norm() - 1.0).abs() < 1e-12);
    let near = e.vector("sparse attention in graph transformers").unwrap();
    let far = e.vector("protein folding with diffusion models").unwrap();
    assert!(cosine(&a, &near).unwrap() > cosine(&a, &far).unwrap());
    assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert!(matches!(e.vector("  "), Err(RetrievalError::InvalidInput(_))));
}

#[test]
fn cosine_rejects_mismatched_dimensions() {
    let a = HashingEmbedder::new(8).vector("x").unwrap();
    let b = HashingEmbedder::new(16).vector("x").unwrap();
    assert_eq!(cosine(&a, &b), Err(RetrievalError::DimensionMismatch(8, 16)));
}

#[test]
fn http_embedder_wire_format() {
    let transport = Arc::new(FixtureTransport::new().route(
        Method::Post,
        "http://embed.local/v1/embeddings",
        200,
        json!({"data": [{"embedding": [3.0, 4.0]}]}).to_string(),
    ));
    let e = HttpEmbedder::new(transport.clone(), "http://embed.local/v1/").with_model("tiny", 2);
    let v = rt().block_on(e.embed("hello")).unwrap();
    assert_eq!(v.values, vec![0.6, 0.8]);
    assert_eq!(v.model_id, "tiny");
    assert_eq!(transport.log(), vec!["http://embed.local/v1/embeddings".to_string()]);

    let wrong_dim = HttpEmbedder::new(transport, "http://embed.local/v1").with_model("tiny", 3);
    assert_eq!(rt().block_on(wrong_dim.embed("hello")), Err(RetrievalError::DimensionMismatch(2, 3)));

    let down = HttpEmbedder::new(Arc::new(FixtureTransport::down()), "http://embed.local/v1");
    assert!(matches!(rt().block_on(down.embed("x")), Err(RetrievalError::ProviderUnavailable(_))));
}

// ---------------------------------------------------------------- citations

fn citation_oracle(e: &HashingEmbedder, main: &PaperRecord, cited: &[PaperRecord], k: usize) -> Vec<(String, f64)> {
    let anchor = e.vector(&main.similarity_text()).unwrap();
    let scored: Vec<(String, f64)> = cited
        .iter()
        .map(|p| (p.id.clone(), sim(&anchor, &e.vector(&p.similarity_text()).unwrap())))
        .collect();
    rank_oracle(&scored, k)
}

#[test]
fn filter_citations_matches_oracle_on_fixture_pools() {
    let pools: Vec<Pool> = common::read_json("retrieval/citation_pools.json");
    let e = HashingEmbedder::default();
    for pool in &pools {
        for k in [1, pool.k, pool.cited.len(), pool.cited.len() + 5] {
            let got = rt().block_on(filter_citations(&e, &pool.main, &pool.cited, k)).unwrap();
            let got: Vec<(String, f64)> = got.into_iter().map(|(p, s)| (p.id, s)).collect();
            assert_same_ranking(&got, &citation_oracle(&e, &pool.main, &pool.cited, k));
            assert_eq!(got.len(), k.min(pool.cited.len()), "{}", pool.name);
        }
    }
    // the verbatim copy of the main paper ranks first with similarity 1
    let got = rt().block_on(filter_citations(&e, &pools[0].main, &pools[0].cited, 3)).unwrap();
    assert_eq!(got[0].0.id, "dup-of-main");
    assert!((got[0].1 - 1.0).abs() < 1e-12);
    // identical records tie; the smaller id wins
    let tied: Vec<_> = rt()
        .block_on(filter_citations(&e, &pools[3].main, &pools[3].cited, 10))
        .unwrap()
        .into_iter()
        .map(|(p, _)| p.id)
        .collect();
    let a = tied.iter().position(|i| i == "aaaa-tie").unwrap();
    assert_eq!(tied[a + 1], "zzzz-tie");
}

#[test]
fn filter_citations_edge_cases() {
    let e = HashingEmbedder::default();
    let main = PaperRecord::new("m", "Main");
    assert!(rt().block_on(filter_citations(&e, &main, &[], 5)).unwrap().is_empty());
    assert!(matches!(
        rt().block_on(filter_citations(&e, &main, &[], 0)),
        Err(RetrievalError::InvalidInput(_))
    ));
}

const VOCAB: &[&str] = &["graph", "sparse", "attention", "claims", "evidence", "routing", "model", "data"];

fn record_strategy() -> impl Strategy<Value = (u8, Vec<usize>)> {
    (0u8..40, prop::collection::vec(0..VOCAB.len(), 1..6))
}

fn make_records(raw: Vec<(u8, Vec<usize>)>) -> Vec<PaperRecord> {
    let mut seen = std::collections::HashSet::new();
    raw.into_iter()
        .filter(|(id, _)| seen.insert(*id))
        .map(|(id, words)| {
            let mut p = PaperRecord::new(format!("p{id:02}"), words.iter().map(|&w| VOCAB[w]).collect::<Vec<_>>().join(" "));
            p.year = Some(2015 + (id as i32 % 11));
            p
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn filter_citations_matches_oracle_on_random_pools(
        main in prop::collection::vec(0..VOCAB.len(), 1..6),
        raw in prop::collection::vec(record_strategy(), 0..25),
        k in 1usize..12,
    ) {
        let e = HashingEmbedder::default();
        let main = PaperRecord::new("main", main.iter().map(|&w| VOCAB[w]).collect::<Vec<_>>().join(" "));
        let cited = make_records(raw);
        let got = rt().block_on(filter_citations(&e, &main, &cited, k)).unwrap();
        let got: Vec<(String, f64)> = got.into_iter().map(|(p, s)| (p.id, s)).collect();
        let want = citation_oracle(&e, &main, &cited, k);
        prop_assert_eq!(got.iter().map(|g| &g.0).collect::<Vec<_>>(), want.iter().map(|w| &w.0).collect::<Vec<_>>());
    }

    #[test]
    fn polarity_aggregation_is_order_free(labels in prop::collection::vec(any::<bool>(), 1..12), seed in any::<u64>()) {
        let labels: Vec<Polarity> = labels.into_iter().map(|b| if b { Polarity::Positive } else { Polarity::Negative }).collect();
        let mut shuffled = labels.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        let pos = labels.iter().filter(|l| **l == Polarity::Positive).count();
        let neg = labels.len() - pos;
        let want = if pos > neg { RelationClass::Supporting } else { RelationClass::Contrasting };
        prop_assert_eq!(aggregate_polarity(&labels).unwrap(), want);
        prop_assert_eq!(aggregate_polarity(&shuffled).unwrap(), want);
    }
}

fn ctx(key: &str, sentence: &str) -> CitationContext {
    CitationContext {
        citation_key: key.into(),
        sentence: sentence.into(),
        section_heading: "Introduction".into(),
        position: Position { section: 0, paragraph: 0, sentence: 0 },
    }
}

#[test]
fn polarity_examples() {
    let llm = synthetic();
    let pos = rt().block_on(classify_polarity(&ctx("a", "Our method outperforms ⟨cite:a⟩ on all benchmarks."), &llm));
    assert_eq!(pos, Ok(Polarity::Positive));
    let neg = rt().block_on(classify_polarity(&ctx("a", "Unlike ⟨cite:a⟩, we avoid quadratic memory."), &llm));
    assert_eq!(neg, Ok(Polarity::Negative));

    let mock = Arc::new(MockProvider::new());
    mock.script(schema::CITATION_POLARITY, std::iter::repeat_n(Step::Respond(json!({"polarity": "neutral"})), 3));
    let err = rt().block_on(classify_polarity(&ctx("a", "Some ⟨cite:a⟩ text."), &session(mock)));
    assert!(matches!(err, Err(RetrievalError::ExtractionFailed(_))));
    assert!(matches!(
        rt().block_on(classify_polarity(&ctx("a", " "), &llm)),
        Err(RetrievalError::InvalidInput(_))
    ));
}

#[test]
fn aggregation_examples() {
    use Polarity::*;
    assert_eq!(aggregate_polarity(&[Positive, Positive, Negative]), Ok(RelationClass::Supporting));
    assert_eq!(aggregate_polarity(&[Positive, Negative]), Ok(RelationClass::Contrasting));
    assert_eq!(aggregate_polarity_with(&[Positive, Negative], TieBreak::Supporting), Ok(RelationClass::Supporting));
    assert_eq!(aggregate_polarity(&[]), Err(RetrievalError::EmptyLabels));
}

#[test]
fn classify_citations_drops_failed_contexts_and_empty_papers() {
    let mock = Arc::new(MockProvider::new());
    mock.rule(schema::CITATION_POLARITY, "good", json!({"polarity": "positive"}));
    mock.rule(schema::CITATION_POLARITY, "weak", json!({"polarity": "negative"}));
    mock.rule(schema::CITATION_POLARITY, "broken", json!({"polarity": "maybe"}));
    let cand = |id: &str, sentences: &[&str]| CitationCandidate {
        record: PaperRecord::new(id, id.to_uppercase()),
        raw_similarity: -0.2,
        contexts: sentences.iter().map(|s| ctx(id, s)).collect(),
    };
    let out = rt()
        .block_on(classify_citations(
            vec![
                cand("a", &["A good result.", "A good baseline.", "A weak point."]),
                cand("b", &["A broken sentence."]),
                cand("c", &["A weak claim.", "A broken one."]),
            ],
            &session(mock),
            3,
            TieBreak::Contrasting,
        ))
        .unwrap();
    let ids: Vec<_> = out.iter().map(|r| (r.id().to_string(), r.class, r.contexts.len())).collect();
    assert_eq!(
        ids,
        vec![("a".into(), RelationClass::Supporting, 3), ("c".into(), RelationClass::Contrasting, 1)]
    );
    assert!(out.iter().all(|r| r.is_consistent() && r.similarity == 0.0 && r.raw_similarity == -0.2));
}

// ---------------------------------------------------------------- semantic

#[test]
fn decomposition_examples() {
    let llm = synthetic();
    let t = rt()
        .block_on(decompose_abstract(
            "Dense attention is expensive. We propose routing to cut memory. Results are strong.",
            &llm,
        ))
        .unwrap();
    assert_eq!(t.background, "Dense attention is expensive.");
    assert_eq!(t.target, "We propose routing to cut memory. Results are strong.");
    assert!(matches!(rt().block_on(decompose_abstract("", &llm)), Err(RetrievalError::InvalidInput(_))));

    let mock = Arc::new(MockProvider::new());
    mock.script(schema::ABSTRACT_DECOMPOSITION, [Step::Respond(json!({"background": "", "target": " "}))]);
    assert!(matches!(
        rt().block_on(decompose_abstract("Something.", &session(mock))),
        Err(RetrievalError::ExtractionFailed(_))
    ));
}

/// Independent re-derivation of the semantic ranking from decompositions.
fn semantic_oracle(
    e: &HashingEmbedder,
    main: &TermDecomposition,
    papers: &[(PaperRecord, TermDecomposition)],
    k: usize,
    cutoff: Option<i32>,
) -> Vec<(String, f64, RelationClass)> {
    let v = |s: &str| (!s.trim().is_empty()).then(|| e.vector(s).unwrap());
    let (mb, mt) = (v(&main.background), v(&main.target));
    let mut scored = Vec::new();
    for (p, t) in papers {
        if cutoff.is_some_and(|c| p.year.is_some_and(|y| y > c)) || p.abstract_text.trim().is_empty() {
            continue;
        }
        let pair = |a: &Option<EmbeddingVector>, b: Option<EmbeddingVector>| match (a, b) {
            (Some(a), Some(b)) => Some(sim(a, &b)),
            _ => None,
        };
        let bg = pair(&mb, v(&t.background));
        let tg = pair(&mt, v(&t.target));
        let best = match (bg, tg) {
            (Some(b), Some(t)) => Some(if nano(t) > nano(b) { (t, RelationClass::Target) } else { (b, RelationClass::Background) }),
            (Some(b), None) => Some((b, RelationClass::Background)),
            (None, Some(t)) => Some((t, RelationClass::Target)),
            (None, None) => None,
        };
        if let Some((s, c)) = best {
            scored.push((p.id.clone(), s, c));
        }
    }
    let flat: Vec<(String, f64)> = scored.iter().map(|s| (s.0.clone(), s.1)).collect();
    rank_oracle(&flat, k)
        .into_iter()
        .map(|(id, s)| {
            let class = scored.iter().find(|x| x.0 == id).unwrap().2;
            (id, s, class)
        })
        .collect()
}

fn decompositions(papers: &[PaperRecord], llm: &LlmSession) -> Vec<(PaperRecord, TermDecomposition)> {
    papers
        .iter()
        .map(|p| {
            let t = if p.abstract_text.trim().is_empty() {
                TermDecomposition::default()
            } else {
                rt().block_on(decompose_abstract(&p.abstract_text, llm)).unwrap()
            };
            (p.clone(), t)
        })
        .collect()
}

#[test]
fn match_semantic_matches_oracle_on_fixture_batches() {
    let batches: Vec<Batch> = common::read_json("retrieval/semantic_batches.json");
    let e = HashingEmbedder::default();
    let llm = synthetic();
    for b in &batches {
        let main = rt().block_on(decompose_abstract(&b.main_abstract, &llm)).unwrap();
        let batch = RecommendationBatch::new("seed", b.papers.clone(), b.papers.len());
        let decomposed = decompositions(&b.papers, &llm);
        for (k, cutoff) in [(b.k, Some(b.cutoff_year)), (b.k, None), (b.papers.len(), Some(b.cutoff_year))] {
            let got = rt().block_on(match_semantic(&main, &batch, k, &llm, &e, cutoff, 4)).unwrap();
            let want = semantic_oracle(&e, &main, &decomposed, k, cutoff);
            let got_ids: Vec<_> = got.iter().map(|r| (r.id().to_string(), r.class)).collect();
            let want_ids: Vec<_> = want.iter().map(|w| (w.0.clone(), w.2)).collect();
            assert_eq!(got_ids, want_ids, "{} k={k} cutoff={cutoff:?}", b.name);
            for (g, w) in got.iter().zip(&want) {
                assert!((g.raw_similarity - w.1).abs() < 1e-12);
                assert!(g.is_consistent());
            }
            if let Some(c) = cutoff {
                assert!(got.iter().all(|r| r.record.year.is_none_or(|y| y <= c)));
            }
        }
    }
    // a recommendation restating the main abstract matches with similarity 1
    let b = &batches[0];
    let main = rt().block_on(decompose_abstract(&b.main_abstract, &llm)).unwrap();
    let batch = RecommendationBatch::new("seed", b.papers.clone(), 8);
    let got = rt().block_on(match_semantic(&main, &batch, 3, &llm, &e, Some(2023), 4)).unwrap();
    assert_eq!(got[0].id(), b.papers[3].id);
    assert!((got[0].raw_similarity - 1.0).abs() < 1e-12);
}

#[test]
fn match_semantic_is_independent_of_parallelism() {
    let batches: Vec<Batch> = common::read_json("retrieval/semantic_batches.json");
    let e = HashingEmbedder::default();
    for b in &batches {
        let llm = synthetic();
        let main = rt().block_on(decompose_abstract(&b.main_abstract, &llm)).unwrap();
        let batch = RecommendationBatch::new("seed", b.papers.clone(), 8);
        let one = rt().block_on(match_semantic(&main, &batch, 5, &llm, &e, Some(2023), 1)).unwrap();
        let eight = rt().block_on(match_semantic(&main, &batch, 5, &llm, &e, Some(2023), 8)).unwrap();
        assert_eq!(one, eight);
    }
}

#[test]
fn match_semantic_edge_cases() {
    let e = HashingEmbedder::default();
    let llm = synthetic();
    let main = TermDecomposition { background: "graphs".into(), target: "routing".into() };
    let empty = RecommendationBatch::new("s", vec![], 10);
    assert!(rt().block_on(match_semantic(&main, &empty, 3, &llm, &e, None, 4)).unwrap().is_empty());
    let bad = TermDecomposition::default();
    assert!(matches!(
        rt().block_on(match_semantic(&bad, &empty, 3, &llm, &e, None, 4)),
        Err(RetrievalError::InvalidInput(_))
    ));
    // cut-off papers never reach the model
    let mock = Arc::new(MockProvider::synthetic());
    let mut late = PaperRecord::new("late", "Late");
    late.abstract_text = "Routing matters. We route.".into();
    late.year = Some(2025);
    let batch = RecommendationBatch::new("s", vec![late], 10);
    let got = rt().block_on(match_semantic(&main, &batch, 3, &session(mock.clone()), &e, Some(2024), 4)).unwrap();
    assert!(got.is_empty());
    assert_eq!(mock.call_count(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cutoff_excludes_every_later_paper(
        raw in prop::collection::vec(record_strategy(), 0..12),
        cutoff in 2014i32..2026,
        k in 1usize..12,
    ) {
        let e = HashingEmbedder::default();
        let llm = synthetic();
        let papers: Vec<PaperRecord> = make_records(raw)
            .into_iter()
            .map(|mut p| { p.abstract_text = format!("Existing {} is hard. We propose {}.", p.title, p.title); p })
            .collect();
        let main = TermDecomposition { background: "Existing graph attention is hard.".into(), target: "We propose sparse routing.".into() };
        let batch = RecommendationBatch::new("s", papers.clone(), papers.len().max(1));
        let got = rt().block_on(match_semantic(&main, &batch, k, &llm, &e, Some(cutoff), 3)).unwrap();
        prop_assert!(got.iter().all(|r| r.record.year.unwrap() <= cutoff));
        let want = semantic_oracle(&e, &main, &decompositions(&papers, &llm), k, Some(cutoff));
        prop_assert_eq!(
            got.iter().map(|r| r.id().to_string()).collect::<Vec<_>>(),
            want.iter().map(|w| w.0.clone()).collect::<Vec<_>>()
        );
    }
}

// ---------------------------------------------------------------- summaries

fn semantic_related() -> RelatedPaper {
    RelatedPaper {
        record: PaperRecord::new("r", "Related Work"),
        source: Source::Semantic,
        class: RelationClass::Target,
        similarity: 0.7,
        raw_similarity: 0.7,
        summary: String::new(),
        contexts: vec![],
        matched_text: Some("We propose routing.".into()),
    }
}

#[test]
fn summaries() {
    let main = PaperRecord::new("m", "Main Paper");
    let related = semantic_related();

    let s = rt().block_on(summarize_relation(&main, &related, &synthetic())).unwrap();
    assert!(s.contains("target"), "{s}");

    let mock = Arc::new(MockProvider::new());
    mock.script(schema::RELATION_SUMMARY, [Step::Respond(json!({"summary": "Both study routing."}))]);
    let s = rt().block_on(summarize_relation(&main, &related, &session(mock))).unwrap();
    assert_eq!(s, "Both study routing. (relation: target)");

    let down = Arc::new(MockProvider::new());
    down.script(schema::RELATION_SUMMARY, [Step::Fatal("no".into())]);
    let s = rt().block_on(summarize_relation(&main, &related, &session(down))).unwrap();
    assert_eq!(s, fallback_summary(&related));
    assert_eq!(s, "Related Work is a target paper. We propose routing.");

    let mut broken = related.clone();
    broken.source = Source::Citation;
    broken.class = RelationClass::Supporting;
    broken.matched_text = None;
    assert!(matches!(
        rt().block_on(summarize_relation(&main, &broken, &synthetic())),
        Err(RetrievalError::InvalidInput(_))
    ));
}
