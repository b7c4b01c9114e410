//! Novelty assessment for scientific papers.
//!
//! The crate is organised around the stages of one evaluation:
//!
//! - [`ingest`]: arXiv and Semantic Scholar clients behind a single injectable
//!   [`ingest::Transport`], with an on-disk response cache and rate limiting.
//! - [`texparse`]: LaTeX to plain structured text, bibliography parsing and
//!   citation-context extraction.
//! - [`graph`]: the claim → method → experiment structure of a paper, its
//!   validation and topological linearization.
//! - [`retrieval`]: embeddings, citation filtering, polarity classification and
//!   background/target matching of recommended papers.
//! - [`llm`]: the model gateway (schema-constrained requests, retries, mock
//!   provider, cost ledger).
//! - [`assess`]: evidence assembly, sampled novelty scoring and the final report.
//! - [`evalharness`]: ground-truth binarization, classification metrics and the
//!   Bradley-Terry rationale tournament.
//! - [`pipeline`]: the end-to-end orchestration with progress events and
//!   cancellation, shared by the server and the headless CLI.

pub mod assess;
pub mod clock;
pub mod evalharness;
pub mod graph;
pub mod ingest;
pub mod llm;
pub mod pipeline;
pub mod retrieval;
pub mod texparse;

/// Version string mixed into every cache key. Bump when prompts, schemas or
/// any algorithm that shapes a result changes.
pub const PIPELINE_VERSION: &str = "noveltrace-pipeline/1;prompts/1";

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/latex.md")]
    mod latex {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/bradley_terry.md")]
    mod bradley_terry {}
    #[doc = include_str!("../../../book/src/server.md")]
    mod server {}
}
