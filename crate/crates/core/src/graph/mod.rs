//! The claim → method → experiment structure of a paper.
//!
//! A [`PaperGraph`] is a small DAG rooted at a single title node. Edges only
//! go one level down the hierarchy (title→claim, claim→method,
//! method→experiment), and every non-title node carries a verbatim excerpt
//! from the paper.

mod extract;
mod linearize;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::LlmError;

pub use extract::{best_matching_sentence, extract_graph, Extraction};
pub use linearize::{linear_order, linearize};
pub use validate::{validate_graph, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Title,
    Claim,
    Method,
    Experiment,
}

impl NodeKind {
    /// Position in the hierarchy, title first.
    pub fn rank(self) -> u8 {
        self as u8
    }

    /// The only kind this kind may point to.
    pub fn child(self) -> Option<NodeKind> {
        match self {
            Self::Title => Some(Self::Claim),
            Self::Claim => Some(Self::Method),
            Self::Method => Some(Self::Experiment),
            Self::Experiment => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Title => "title",
            Self::Claim => "claim",
            Self::Method => "method",
            Self::Experiment => "experiment",
        }
    }
}

impl std::fmt::Display for NodeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
    #[serde(default)]
    pub excerpt: String,
    /// Set when the model's excerpt was not found in the paper and was
    /// replaced by the closest sentence.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub excerpt_flagged: bool,
}

impl GraphNode {
    pub fn new(id: &str, kind: NodeKind, label: &str, excerpt: &str) -> Self {
        Self {
            id: id.to_string(),
            kind,
            label: label.to_string(),
            excerpt: excerpt.to_string(),
            excerpt_flagged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: &str, to: &str) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

impl PaperGraph {
    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn title(&self) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.kind == NodeKind::Title)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph extraction failed: {0}")]
    ExtractionFailed(String),
    #[error("document is empty")]
    EmptyDocument,
    #[error("graph contains a cycle")]
    CyclicGraph,
    #[error(transparent)]
    Llm(LlmError),
}
