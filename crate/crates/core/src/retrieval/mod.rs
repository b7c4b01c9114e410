//! The related-papers set: embedding-based filtering of a paper's citations,
//! citation-context polarity, and background/target matching of recommended
//! papers.

mod embed;
mod ops;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PaperRecord;
use crate::texparse::CitationContext;

pub use embed::{
    cosine, Embedder, EmbeddingVector, HashingEmbedder, HttpEmbedder, DEFAULT_DIM,
    DEFAULT_EMBEDDING_MODEL,
};
pub use ops::{
    aggregate_polarity, aggregate_polarity_with, classify_citations, classify_polarity,
    decompose_abstract, fallback_summary, filter_citations, match_semantic, summarize_relation,
    CitationCandidate, DEFAULT_PARALLELISM,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no polarity labels to aggregate")]
    EmptyLabels,
    #[error("extraction failed: {0}")]
    ExtractionFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Citation,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationClass {
    Supporting,
    Contrasting,
    Background,
    Target,
}

impl RelationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Supporting => "supporting",
            Self::Contrasting => "contrasting",
            Self::Background => "background",
            Self::Target => "target",
        }
    }

    pub fn source(self) -> Source {
        match self {
            Self::Supporting | Self::Contrasting => Source::Citation,
            Self::Background | Self::Target => Source::Semantic,
        }
    }
}

impl std::fmt::Display for RelationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What an exact polarity tie aggregates to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Contrasting,
    Supporting,
}

/// Background (what motivates the work) and target (what it sets out to do)
/// parts of an abstract.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDecomposition {
    pub background: String,
    pub target: String,
}

impl TermDecomposition {
    pub fn is_valid(&self) -> bool {
        !self.background.trim().is_empty() || !self.target.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredContext {
    #[serde(flatten)]
    pub context: CitationContext,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedPaper {
    pub record: PaperRecord,
    pub source: Source,
    pub class: RelationClass,
    /// Cosine similarity with negatives clamped to 0, for display.
    pub similarity: f64,
    pub raw_similarity: f64,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<ScoredContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_text: Option<String>,
}

impl RelatedPaper {
    pub fn id(&self) -> &str {
        &self.record.id
    }

    /// Source/class/contexts/matched-text consistency.
    pub fn is_consistent(&self) -> bool {
        let sim_ok = (0.0..=1.0).contains(&self.similarity);
        sim_ok
            && self.class.source() == self.source
            && match self.source {
                Source::Citation => !self.contexts.is_empty() && self.matched_text.is_none(),
                Source::Semantic => {
                    self.contexts.is_empty()
                        && self.matched_text.as_deref().is_some_and(|t| !t.trim().is_empty())
                }
            }
    }
}

/// Ranking key for a similarity: values equal to nine decimal places tie, so
/// mathematically equal similarities that differ only by rounding noise fall
/// through to the id tie-break.
pub fn similarity_key(sim: f64) -> i64 {
    (sim * 1e9).round() as i64
}

/// Similarity shown to users: negatives clamp to 0.
pub fn display_similarity(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}
