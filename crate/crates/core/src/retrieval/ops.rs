use std::cmp::Ordering;

use futures::stream::{self, StreamExt};
use serde_json::json;

use super::{
    cosine, display_similarity, similarity_key, Embedder, EmbeddingVector, Polarity, RelatedPaper, RelationClass,
    RetrievalError, ScoredContext, Source, TermDecomposition, TieBreak,
};
use crate::ingest::{PaperRecord, RecommendationBatch};
use crate::llm::{prompts, LlmError, LlmSession};
use crate::texparse::CitationContext;

/// Default bound on concurrent per-candidate work.
pub const DEFAULT_PARALLELISM: usize = 4;

fn llm_err(e: LlmError) -> RetrievalError {
    match e {
        LlmError::Cancelled => RetrievalError::Cancelled,
        other => RetrievalError::ExtractionFailed(other.to_string()),
    }
}

/// Highest similarity first; similarities with the same [`similarity_key`]
/// fall back to id order.
fn by_similarity(a: (f64, &str), b: (f64, &str)) -> Ordering {
    similarity_key(b.0)
        .cmp(&similarity_key(a.0))
        .then_with(|| a.1.cmp(b.1))
}

/// The `k` cited papers most similar to `main` (title + abstract embeddings),
/// with their raw cosine similarity.
pub async fn filter_citations(
    embedder: &dyn Embedder,
    main: &PaperRecord,
    cited: &[PaperRecord],
    k: usize,
) -> Result<Vec<(PaperRecord, f64)>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidInput("k must be at least 1".into()));
    }
    let anchor = embedder.embed(&main.similarity_text()).await?;
    let vectors: Vec<Result<EmbeddingVector, RetrievalError>> = stream::iter(0..cited.len())
        .map(|i| {
            let text = cited[i].similarity_text();
            async move { embedder.embed(&text).await }
        })
        .buffered(DEFAULT_PARALLELISM)
        .collect()
        .await;
    let mut scored = Vec::with_capacity(cited.len());
    for (p, v) in cited.iter().zip(vectors) {
        scored.push((p.clone(), cosine(&anchor, &v?)?));
    }
    scored.sort_by(|a, b| by_similarity((a.1, &a.0.id), (b.1, &b.0.id)));
    scored.truncate(k);
    Ok(scored)
}

/// Positive or negative mention of the cited work in one context sentence.
pub async fn classify_polarity(
    context: &CitationContext,
    llm: &LlmSession,
) -> Result<Polarity, RetrievalError> {
    if context.sentence.trim().is_empty() {
        return Err(RetrievalError::InvalidInput("context sentence is empty".into()));
    }
    let req = llm
        .request(
            &prompts::CITATION_POLARITY,
            &[
                ("key", &context.citation_key),
                ("section", &context.section_heading),
                ("sentence", &context.sentence),
            ],
        )
        .temperature(0.0)
        .payload(json!({"sentence": context.sentence, "key": context.citation_key}));
    let resp = llm.complete(&req).await.map_err(llm_err)?;
    match resp.content["polarity"].as_str() {
        Some("positive") => Ok(Polarity::Positive),
        Some("negative") => Ok(Polarity::Negative),
        other => Err(RetrievalError::ExtractionFailed(format!("unexpected polarity {other:?}"))),
    }
}

/// Majority vote; a tie is contrasting.
pub fn aggregate_polarity(labels: &[Polarity]) -> Result<RelationClass, RetrievalError> {
    aggregate_polarity_with(labels, TieBreak::Contrasting)
}

pub fn aggregate_polarity_with(
    labels: &[Polarity],
    tie: TieBreak,
) -> Result<RelationClass, RetrievalError> {
    if labels.is_empty() {
        return Err(RetrievalError::EmptyLabels);
    }
    let pos = labels.iter().filter(|l| **l == Polarity::Positive).count();
    let neg = labels.len() - pos;
    Ok(match pos.cmp(&neg) {
        Ordering::Greater => RelationClass::Supporting,
        Ordering::Less => RelationClass::Contrasting,
        Ordering::Equal => match tie {
            TieBreak::Contrasting => RelationClass::Contrasting,
            TieBreak::Supporting => RelationClass::Supporting,
        },
    })
}

/// A filtered citation together with the sentences that cite it.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationCandidate {
    pub record: PaperRecord,
    pub raw_similarity: f64,
    pub contexts: Vec<CitationContext>,
}

/// Classify every context of every candidate and aggregate per paper.
/// Contexts whose classification fails are dropped with a warning; papers
/// left without any classified context are dropped. Output keeps input order.
pub async fn classify_citations(
    candidates: Vec<CitationCandidate>,
    llm: &LlmSession,
    parallelism: usize,
    tie: TieBreak,
) -> Result<Vec<RelatedPaper>, RetrievalError> {
    let jobs: Vec<(usize, CitationContext)> = candidates
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.contexts.iter().cloned().map(move |ctx| (i, ctx)))
        .collect();
    let results: Vec<(usize, CitationContext, Result<Polarity, RetrievalError>)> = stream::iter(jobs)
        .map(|(i, ctx)| async move {
            let r = classify_polarity(&ctx, llm).await;
            (i, ctx, r)
        })
        .buffered(parallelism.max(1))
        .collect()
        .await;

    let mut scored: Vec<Vec<ScoredContext>> = vec![Vec::new(); candidates.len()];
    for (i, context, r) in results {
        match r {
            Ok(polarity) => scored[i].push(ScoredContext { context, polarity }),
            Err(RetrievalError::Cancelled) => return Err(RetrievalError::Cancelled),
            Err(e) => tracing::warn!(key = %context.citation_key, "polarity classification dropped: {e}"),
        }
    }
    let mut out = Vec::new();
    for (cand, contexts) in candidates.into_iter().zip(scored) {
        if contexts.is_empty() {
            tracing::warn!(id = %cand.record.id, "citation has no classified context; skipped");
            continue;
        }
        let labels: Vec<Polarity> = contexts.iter().map(|c| c.polarity).collect();
        let class = aggregate_polarity_with(&labels, tie)?;
        out.push(RelatedPaper {
            record: cand.record,
            source: Source::Citation,
            class,
            similarity: display_similarity(cand.raw_similarity),
            raw_similarity: cand.raw_similarity,
            summary: String::new(),
            contexts,
            matched_text: None,
        });
    }
    Ok(out)
}

pub async fn decompose_abstract(
    abstract_text: &str,
    llm: &LlmSession,
) -> Result<TermDecomposition, RetrievalError> {
    if abstract_text.trim().is_empty() {
        return Err(RetrievalError::InvalidInput("abstract is empty".into()));
    }
    let req = llm
        .request(&prompts::ABSTRACT_DECOMPOSITION, &[("abstract", abstract_text)])
        .temperature(0.0)
        .payload(json!({"abstract": abstract_text}));
    let resp = llm.complete(&req).await.map_err(llm_err)?;
    let terms: TermDecomposition = serde_json::from_value(resp.content)
        .map_err(|e| RetrievalError::ExtractionFailed(e.to_string()))?;
    if !terms.is_valid() {
        return Err(RetrievalError::ExtractionFailed("both background and target are empty".into()));
    }
    Ok(terms)
}

async fn embed_opt(embedder: &dyn Embedder, text: &str) -> Result<Option<EmbeddingVector>, RetrievalError> {
    if text.trim().is_empty() {
        Ok(None)
    } else {
        embedder.embed(text).await.map(Some)
    }
}

fn pair_sim(a: &Option<EmbeddingVector>, b: &Option<EmbeddingVector>) -> Result<Option<f64>, RetrievalError> {
    match (a, b) {
        (Some(a), Some(b)) => cosine(a, b).map(Some),
        _ => Ok(None),
    }
}

/// Decompose each recommended paper and keep the `k` whose background or
/// target is closest to the main paper's. Papers published after
/// `cutoff_year` are excluded before any model call.
pub async fn match_semantic(
    main_terms: &TermDecomposition,
    batch: &RecommendationBatch,
    k: usize,
    llm: &LlmSession,
    embedder: &dyn Embedder,
    cutoff_year: Option<i32>,
    parallelism: usize,
) -> Result<Vec<RelatedPaper>, RetrievalError> {
    if !main_terms.is_valid() {
        return Err(RetrievalError::InvalidInput("main decomposition is empty".into()));
    }
    let main_bg = embed_opt(embedder, &main_terms.background).await?;
    let main_tg = embed_opt(embedder, &main_terms.target).await?;

    let mut pool: Vec<&PaperRecord> = batch
        .papers
        .iter()
        .filter(|p| match (cutoff_year, p.year) {
            (Some(cut), Some(y)) => y <= cut,
            _ => true,
        })
        .filter(|p| !p.abstract_text.trim().is_empty())
        .collect();
    pool.sort_by(|a, b| a.id.cmp(&b.id));

    let decomposed: Vec<(&PaperRecord, Result<TermDecomposition, RetrievalError>)> = stream::iter(0..pool.len())
        .map(|i| {
            let p: &PaperRecord = pool[i];
            async move { (p, decompose_abstract(&p.abstract_text, llm).await) }
        })
        .buffered(parallelism.max(1))
        .collect()
        .await;

    let mut scored = Vec::new();
    for (p, terms) in decomposed {
        let terms = match terms {
            Ok(t) => t,
            Err(RetrievalError::Cancelled) => return Err(RetrievalError::Cancelled),
            Err(e) => {
                tracing::warn!(id = %p.id, "decomposition failed, candidate skipped: {e}");
                continue;
            }
        };
        let bg = pair_sim(&main_bg, &embed_opt(embedder, &terms.background).await?)?;
        let tg = pair_sim(&main_tg, &embed_opt(embedder, &terms.target).await?)?;
        let (raw, class, matched) = match (bg, tg) {
            (None, None) => continue,
            (Some(b), Some(t)) if similarity_key(b) >= similarity_key(t) => (b, RelationClass::Background, terms.background),
            (Some(b), None) => (b, RelationClass::Background, terms.background),
            (_, Some(t)) => (t, RelationClass::Target, terms.target),
        };
        scored.push(RelatedPaper {
            record: p.clone(),
            source: Source::Semantic,
            class,
            similarity: display_similarity(raw),
            raw_similarity: raw,
            summary: String::new(),
            contexts: Vec::new(),
            matched_text: Some(matched),
        });
    }
    scored.sort_by(|a, b| by_similarity((a.raw_similarity, a.id()), (b.raw_similarity, b.id())));
    scored.truncate(k);
    Ok(scored)
}

/// Template summary used when the model cannot produce one.
pub fn fallback_summary(related: &RelatedPaper) -> String {
    let detail = match related.source {
        Source::Semantic => related.matched_text.clone().unwrap_or_default(),
        Source::Citation => related
            .contexts
            .first()
            .map(|c| c.context.sentence.clone())
            .unwrap_or_default(),
    };
    let lead = format!("{} is a {} paper.", related.record.title.trim(), related.class);
    if detail.trim().is_empty() {
        lead
    } else {
        format!("{lead} {}", detail.trim())
    }
}

fn evidence_for(related: &RelatedPaper) -> String {
    match related.source {
        Source::Citation => related
            .contexts
            .iter()
            .map(|c| {
                let polarity = match c.polarity {
                    Polarity::Positive => "positive",
                    Polarity::Negative => "negative",
                };
                format!("- ({polarity}) {}", c.context.sentence)
            })
            .collect::<Vec<_>>()
            .join("\n"),
        Source::Semantic => format!(
            "- matched {}: {}",
            related.class,
            related.matched_text.as_deref().unwrap_or_default()
        ),
    }
}

/// A short explanation of how `related` connects to `main`. Model failures
/// fall back to [`fallback_summary`]; only a malformed `related` is an error.
pub async fn summarize_relation(
    main: &PaperRecord,
    related: &RelatedPaper,
    llm: &LlmSession,
) -> Result<String, RetrievalError> {
    if related.source == Source::Citation && related.contexts.is_empty() {
        return Err(RetrievalError::InvalidInput(format!(
            "citation {} has no contexts",
            related.id()
        )));
    }
    let evidence = evidence_for(related);
    let relation = related.class.as_str();
    let req = llm
        .request(
            &prompts::RELATION_SUMMARY,
            &[
                ("main_title", &main.title),
                ("main_abstract", &main.abstract_text),
                ("related_title", &related.record.title),
                ("related_abstract", &related.record.abstract_text),
                ("relation", relation),
                ("evidence", &evidence),
            ],
        )
        .temperature(0.0)
        .payload(json!({
            "main_title": main.title,
            "related_title": related.record.title,
            "relation": relation,
            "evidence": evidence,
        }));
    match llm.complete(&req).await {
        Ok(resp) => {
            let mut s = resp.content["summary"].as_str().unwrap_or_default().trim().to_string();
            if s.is_empty() {
                return Ok(fallback_summary(related));
            }
            if !s.to_lowercase().contains(relation) {
                s.push_str(&format!(" (relation: {relation})"));
            }
            Ok(s)
        }
        Err(LlmError::Cancelled) => Err(RetrievalError::Cancelled),
        Err(e) => {
            tracing::warn!(id = %related.id(), "relation summary failed, using template: {e}");
            Ok(fallback_summary(related))
        }
    }
}
