use std::collections::BTreeSet;

use serde_json::json;

use super::{validate_graph, GraphError, NodeKind, PaperGraph, Violation};
use crate::llm::{prompts, LlmError, LlmSession};
use crate::texparse::PlainDocument;

/// Result of [`extract_graph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub graph: PaperGraph,
    /// No claim was found. The graph is still valid, just uninformative.
    pub empty: bool,
    /// Ids of nodes whose excerpt was replaced by the closest sentence.
    pub flagged: Vec<String>,
    /// Model round trips used (1, or 2 after a repair).
    pub rounds: u32,
}

fn words(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// The sentence sharing the most distinct words with `text`; earliest wins
/// ties. `None` only for an empty sentence list.
pub fn best_matching_sentence<'a>(text: &str, sentences: &'a [String]) -> Option<&'a str> {
    let target = words(text);
    let mut best: Option<(usize, &str)> = None;
    for s in sentences {
        let overlap = words(s).intersection(&target).count();
        if best.is_none_or(|(b, _)| overlap > b) {
            best = Some((overlap, s));
        }
    }
    best.map(|(_, s)| s)
}

fn excerpt_is_verbatim(excerpt: &str, doc: &PlainDocument) -> bool {
    doc.paragraphs().any(|p| p.contains(excerpt))
}

/// Ask the model for the paper's structure graph, validate it (with one
/// repair round), and pin every excerpt to text that really occurs in `doc`.
pub async fn extract_graph(
    doc: &PlainDocument,
    title: &str,
    llm: &LlmSession,
) -> Result<Extraction, GraphError> {
    if doc.is_empty() {
        return Err(GraphError::EmptyDocument);
    }
    let sentences = doc.sentences();
    let document = doc.to_text();
    let base = llm
        .request(&prompts::GRAPH_EXTRACTION, &[("title", title), ("document", &document)])
        .temperature(0.0)
        .payload(json!({"title": title, "sentences": sentences}));

    let mut request = base.clone();
    let mut last: Vec<Violation> = Vec::new();
    for round in 1..=2 {
        let response = llm.complete(&request).await.map_err(|e| match e {
            LlmError::SchemaFailure { .. } => GraphError::ExtractionFailed(e.to_string()),
            other => GraphError::Llm(other),
        })?;
        let mut graph: PaperGraph = serde_json::from_value(response.content)
            .map_err(|e| GraphError::ExtractionFailed(e.to_string()))?;

        let mut flagged = Vec::new();
        for node in graph.nodes.iter_mut() {
            if node.kind == NodeKind::Title || node.excerpt.trim().is_empty() {
                continue;
            }
            if !excerpt_is_verbatim(&node.excerpt, doc) {
                if let Some(best) = best_matching_sentence(&node.excerpt, &sentences) {
                    tracing::warn!(node = %node.id, "excerpt not found in paper; replaced by closest sentence");
                    node.excerpt = best.to_string();
                    node.excerpt_flagged = true;
                    flagged.push(node.id.clone());
                }
            }
        }

        match validate_graph(&graph) {
            Ok(()) => {
                let empty = graph.count(NodeKind::Claim) == 0;
                if empty {
                    tracing::warn!("graph extraction found no claims");
                }
                return Ok(Extraction {
                    graph,
                    empty,
                    flagged,
                    rounds: round,
                });
            }
            Err(violations) => {
                tracing::warn!(round, "extracted graph has {} violations", violations.len());
                let mut user = base.user.clone();
                user.push_str("\n\nYour previous graph broke these rules:\n");
                for v in &violations {
                    user.push_str(&format!("- {v}\n"));
                }
                user.push_str("Return a corrected graph.");
                request = base.clone();
                request.user = user;
                last = violations;
            }
        }
    }
    let list: Vec<String> = last.iter().map(ToString::to_string).collect();
    Err(GraphError::ExtractionFailed(list.join("; ")))
}
