//! Novelty scoring and report synthesis.
//!
//! The score is the mean of `k` independent binary votes; the report is one
//! more schema-constrained request that must refer to related papers by the
//! ids of a roster it is given.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::graph::{linearize, PaperGraph};
use crate::ingest::PaperRecord;
use crate::llm::{prompts, CostLedger, LlmError, LlmSession};
use crate::retrieval::{fallback_summary, similarity_key, RelatedPaper, Source};

/// Votes at or above this mean are labelled novel.
pub const NOVELTY_THRESHOLD: f64 = 0.5;
pub const DEFAULT_SAMPLES: usize = 5;
/// Sampling temperature for votes; non-zero so samples can differ.
pub const VOTE_TEMPERATURE: f64 = 0.7;
pub const MIN_KEYWORDS: usize = 3;
pub const MAX_KEYWORDS: usize = 8;
/// The whole evidence text when there is nothing to show.
pub const NO_RELATED_MARKER: &str = "No related papers were found.";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AssessError {
    #[error("no novelty vote succeeded: {0}")]
    ScoringFailed(String),
    #[error("report generation failed: {0}")]
    ReportFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoveltyLabel {
    Novel,
    NotNovel,
}

impl NoveltyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Novel => "novel",
            Self::NotNovel => "not_novel",
        }
    }

    pub fn is_novel(self) -> bool {
        self == Self::Novel
    }
}

/// `score ≥ 0.5` is novel; a tie counts as novel.
pub fn label_for(score: f64) -> NoveltyLabel {
    if score >= NOVELTY_THRESHOLD {
        NoveltyLabel::Novel
    } else {
        NoveltyLabel::NotNovel
    }
}

/// Mean of 0/1 votes. `None` for no votes.
pub fn mean_vote(samples: &[u8]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let ones: u64 = samples.iter().map(|&v| u64::from(v.min(1))).sum();
    Some(ones as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidencePolarity {
    Supports,
    Contradicts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub related_id: String,
    pub explanation: String,
    pub polarity: EvidencePolarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyReport {
    pub paper_id: String,
    pub score: f64,
    pub samples: Vec<u8>,
    pub label: NoveltyLabel,
    pub summary: String,
    pub supporting: Vec<EvidenceItem>,
    pub contradictory: Vec<EvidenceItem>,
    pub keywords: Vec<String>,
    /// Set when only a title and abstract were available: no graph and no
    /// citation evidence.
    pub abstract_only: bool,
    pub cost: CostLedger,
}

impl NoveltyReport {
    /// The report invariants: exact mean, threshold label, evidence
    /// polarities, and every evidence id resolving in `related_ids`.
    pub fn check(&self, related_ids: &HashSet<&str>) -> Result<(), String> {
        if mean_vote(&self.samples) != Some(self.score) {
            return Err(format!("score {} is not the mean of {:?}", self.score, self.samples));
        }
        if label_for(self.score) != self.label {
            return Err(format!("label {:?} does not match score {}", self.label, self.score));
        }
        let lists = [
            (&self.supporting, EvidencePolarity::Supports),
            (&self.contradictory, EvidencePolarity::Contradicts),
        ];
        for (items, polarity) in lists {
            for item in items {
                if item.polarity != polarity {
                    return Err(format!("{} is in the wrong list", item.related_id));
                }
                if !related_ids.contains(item.related_id.as_str()) {
                    return Err(format!("{} does not resolve", item.related_id));
                }
                if item.explanation.trim().is_empty() {
                    return Err(format!("{} has no explanation", item.related_id));
                }
            }
        }
        Ok(())
    }
}

fn llm_err(stage: fn(String) -> AssessError, e: LlmError) -> AssessError {
    match e {
        LlmError::Cancelled => AssessError::Cancelled,
        other => stage(other.to_string()),
    }
}

/// Citations first, then semantic matches; within each, most similar first
/// and id as the final tie-break.
fn evidence_order(a: &RelatedPaper, b: &RelatedPaper) -> Ordering {
    let rank = |r: &RelatedPaper| match r.source {
        Source::Citation => 0,
        Source::Semantic => 1,
    };
    rank(a)
        .cmp(&rank(b))
        .then_with(|| similarity_key(b.similarity).cmp(&similarity_key(a.similarity)))
        .then_with(|| a.id().cmp(b.id()))
}

/// One paragraph per related paper:
///
/// ```text
/// [id] Title
/// Relation: supporting (citation), similarity 0.82
/// Summary: ...
/// ```
///
/// Papers without a summary get the template summary.
pub fn build_evidence_text(related: &[RelatedPaper]) -> String {
    if related.is_empty() {
        return NO_RELATED_MARKER.to_string();
    }
    let mut sorted: Vec<&RelatedPaper> = related.iter().collect();
    sorted.sort_by(|a, b| evidence_order(a, b));
    sorted
        .into_iter()
        .map(|r| {
            let summary = if r.summary.trim().is_empty() {
                fallback_summary(r)
            } else {
                r.summary.trim().to_string()
            };
            let source = match r.source {
                Source::Citation => "citation",
                Source::Semantic => "semantic",
            };
            format!(
                "[{}] {}\nRelation: {} ({source}), similarity {:.2}\nSummary: {summary}",
                r.id(),
                r.record.title.trim(),
                r.class,
                r.similarity,
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn relation_count(evidence_text: &str, class: &str) -> usize {
    let needle = format!("Relation: {class} ");
    evidence_text.lines().filter(|l| l.starts_with(&needle)).count()
}

/// `k` concurrent votes with seeds `0..k`. Failed votes are dropped; the score
/// is the exact mean of the rest.
pub async fn score_novelty(
    paper: &PaperRecord,
    graph_text: &str,
    evidence_text: &str,
    llm: &LlmSession,
    k_samples: usize,
) -> Result<(f64, Vec<u8>), AssessError> {
    if k_samples == 0 {
        return Err(AssessError::InvalidInput("k_samples must be at least 1".into()));
    }
    let payload = json!({
        "title": paper.title,
        "supporting": relation_count(evidence_text, "supporting"),
        "contrasting": relation_count(evidence_text, "contrasting"),
    });
    let base = llm
        .request(
            &prompts::NOVELTY_VOTE,
            &[
                ("title", &paper.title),
                ("abstract", &paper.abstract_text),
                ("graph", graph_text),
                ("evidence", evidence_text),
            ],
        )
        .temperature(VOTE_TEMPERATURE)
        .payload(payload);
    let votes = join_all((0..k_samples).map(|i| {
        let req = base.clone().seed(i as u64);
        async move { llm.complete(&req).await }
    }))
    .await;

    let mut samples = Vec::with_capacity(k_samples);
    let mut last = String::new();
    for (i, vote) in votes.into_iter().enumerate() {
        match vote {
            Ok(resp) => match resp.content["label"].as_str() {
                Some("novel") => samples.push(1),
                Some("not_novel") => samples.push(0),
                other => {
                    last = format!("unexpected label {other:?}");
                    tracing::warn!(sample = i, "{last}");
                }
            },
            Err(LlmError::Cancelled) => return Err(AssessError::Cancelled),
            Err(e) => {
                tracing::warn!(sample = i, "novelty vote dropped: {e}");
                last = e.to_string();
            }
        }
    }
    let score = mean_vote(&samples).ok_or(AssessError::ScoringFailed(last))?;
    Ok((score, samples))
}

/// 3–8 lowercase, de-duplicated keyword phrases in model order. Model failures
/// yield an empty list.
pub async fn extract_keywords(paper: &PaperRecord, llm: &LlmSession) -> Result<Vec<String>, AssessError> {
    if paper.abstract_text.trim().is_empty() {
        return Err(AssessError::InvalidInput("abstract is empty".into()));
    }
    let req = llm
        .request(
            &prompts::KEYWORDS,
            &[("title", &paper.title), ("abstract", &paper.abstract_text)],
        )
        .temperature(0.0)
        .payload(json!({"title": paper.title, "abstract": paper.abstract_text}));
    let resp = match llm.complete(&req).await {
        Ok(r) => r,
        Err(LlmError::Cancelled) => return Err(AssessError::Cancelled),
        Err(e) => {
            tracing::warn!("keyword extraction failed: {e}");
            return Ok(Vec::new());
        }
    };
    let mut seen = HashSet::new();
    let keywords: Vec<String> = resp.content["keywords"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|k| k.as_str())
        .map(|k| k.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .filter(|k| !k.is_empty() && seen.insert(k.clone()))
        .take(MAX_KEYWORDS)
        .collect();
    if keywords.len() < MIN_KEYWORDS {
        tracing::warn!(n = keywords.len(), "too few keywords; discarding");
        return Ok(Vec::new());
    }
    Ok(keywords)
}

fn roster_text(related: &[RelatedPaper]) -> String {
    if related.is_empty() {
        return "(empty)".into();
    }
    related
        .iter()
        .map(|r| format!("- {}: {} ({})", r.id(), r.record.title.trim(), r.class))
        .collect::<Vec<_>>()
        .join("\n")
}

fn evidence_items(value: &serde_json::Value, polarity: EvidencePolarity, known: &HashMap<&str, Source>, abstract_only: bool) -> Vec<EvidenceItem> {
    let mut seen = HashSet::new();
    value
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|item| {
            let id = item["related_id"].as_str()?.trim();
            let explanation = item["explanation"].as_str()?.trim();
            let Some(source) = known.get(id) else {
                tracing::warn!(%id, "report cites an unknown related paper; item dropped");
                return None;
            };
            if explanation.is_empty() || (abstract_only && *source == Source::Citation) || !seen.insert(id.to_string()) {
                return None;
            }
            Some(EvidenceItem {
                related_id: id.to_string(),
                explanation: explanation.to_string(),
                polarity,
            })
        })
        .collect()
}

/// Score the paper, then write the summary and evidence lists. `graph` is
/// `None` in abstract-only mode. `cost` is the session ledger at the end.
pub async fn generate_report(
    paper: &PaperRecord,
    graph: Option<&PaperGraph>,
    related: &[RelatedPaper],
    llm: &LlmSession,
    k_samples: usize,
) -> Result<NoveltyReport, AssessError> {
    let graph_text = match graph {
        Some(g) => linearize(g).map_err(|e| AssessError::ReportFailed(e.to_string()))?,
        None => String::new(),
    };
    generate_report_from_text(paper, &graph_text, graph.is_none(), related, llm, k_samples).await
}

/// [`generate_report`] with the graph already linearized. An empty
/// `graph_text` with `abstract_only` unset is the no-graph ablation: the
/// model sees no structure but citation evidence is kept.
pub async fn generate_report_from_text(
    paper: &PaperRecord,
    graph_text: &str,
    abstract_only: bool,
    related: &[RelatedPaper],
    llm: &LlmSession,
    k_samples: usize,
) -> Result<NoveltyReport, AssessError> {
    let evidence_text = build_evidence_text(related);
    let (score, samples) = score_novelty(paper, graph_text, &evidence_text, llm, k_samples).await?;
    let label = label_for(score);
    let score_text = format!("{score:.2}");

    let roster: Vec<_> = related
        .iter()
        .map(|r| json!({"id": r.id(), "title": r.record.title, "class": r.class}))
        .collect();
    let req = llm
        .request(
            &prompts::NOVELTY_REPORT,
            &[
                ("label", label.as_str()),
                ("score", &score_text),
                ("title", &paper.title),
                ("abstract", &paper.abstract_text),
                ("graph", graph_text),
                ("evidence", &evidence_text),
                ("roster", &roster_text(related)),
            ],
        )
        .temperature(0.0)
        .payload(json!({"label": label.as_str(), "roster": roster}));
    let content = llm
        .complete(&req)
        .await
        .map_err(|e| llm_err(AssessError::ReportFailed, e))?
        .content;

    let known: HashMap<&str, Source> = related.iter().map(|r| (r.id(), r.source)).collect();
    let supporting = evidence_items(&content["supporting"], EvidencePolarity::Supports, &known, abstract_only);
    let contradictory = evidence_items(&content["contradictory"], EvidencePolarity::Contradicts, &known, abstract_only);
    let summary = content["summary"].as_str().unwrap_or_default().trim().to_string();
    if summary.is_empty() {
        return Err(AssessError::ReportFailed("empty summary".into()));
    }

    let keywords = if paper.abstract_text.trim().is_empty() {
        Vec::new()
    } else {
        extract_keywords(paper, llm).await?
    };

    Ok(NoveltyReport {
        paper_id: paper.id.clone(),
        score,
        samples,
        label,
        summary,
        supporting,
        contradictory,
        keywords,
        abstract_only,
        cost: llm.ledger(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(label_for(0.5), NoveltyLabel::Novel);
        assert_eq!(label_for(0.49999), NoveltyLabel::NotNovel);
        assert_eq!(mean_vote(&[1, 1, 0, 1, 0]), Some(0.6));
        assert_eq!(mean_vote(&[]), None);
    }

    #[test]
    fn relation_lines_are_counted() {
        let text = "[a] A\nRelation: supporting (citation), similarity 0.10\nSummary: s\n\n[b] B\nRelation: contrasting (citation), similarity 0.20\nSummary: Relation: supporting";
        assert_eq!(relation_count(text, "supporting"), 1);
        assert_eq!(relation_count(text, "contrasting"), 1);
    }
}
