//! One evaluation end to end: fetch, parse, graph, related work, report.
//!
//! Stages run in a fixed order and announce themselves through a progress
//! callback before they start. The caller emits the terminal event (done,
//! error or cancelled); [`ProgressEvent::terminal`] builds it.

use std::collections::{BTreeMap, HashSet};
use std::future::Future;
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio_util::sync::CancellationToken;

use crate::assess::{generate_report_from_text, AssessError, NoveltyReport};
use crate::clock::Clock;
use crate::evalharness::Ablation;
use crate::graph::{extract_graph, linearize, GraphError, PaperGraph};
use crate::ingest::{is_valid_arxiv_id, ArxivClient, IngestError, PaperRecord, RecommendationBatch, ScholarClient};
use crate::llm::{Gateway, LlmError, LlmSession};
use crate::retrieval::{
    classify_citations, decompose_abstract, filter_citations, match_semantic, summarize_relation, CitationCandidate,
    Embedder, RelatedPaper, RetrievalError, TieBreak, DEFAULT_PARALLELISM,
};
use crate::texparse::{extract_citation_contexts, parse_bibliography, to_plain_text, Bibliography, CitationContext, TexError};
use crate::PIPELINE_VERSION;

pub const MAX_K_CITATIONS: usize = 100;
pub const MAX_K_RECOMMENDED: usize = 100;
pub const MAX_K_RELATED: usize = 50;
pub const MAX_K_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    FetchPaper,
    Parse,
    ExtractGraph,
    FetchRelated,
    Classify,
    Assess,
    Done,
    Error,
    Cancelled,
}

impl Stage {
    /// The non-terminal stages in execution order.
    pub const ORDER: [Stage; 6] = [
        Self::FetchPaper,
        Self::Parse,
        Self::ExtractGraph,
        Self::FetchRelated,
        Self::Classify,
        Self::Assess,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FetchPaper => "fetch_paper",
            Self::Parse => "parse",
            Self::ExtractGraph => "extract_graph",
            Self::FetchRelated => "fetch_related",
            Self::Classify => "classify",
            Self::Assess => "assess",
            Self::Done => "done",
            Self::Error => "error",
            Self::Cancelled => "cancelled",
        }
    }

    /// Progress reported when the stage starts. `None` for error and
    /// cancelled, which keep the last reported value.
    pub fn percent(self) -> Option<f64> {
        Some(match self {
            Self::FetchPaper => 0.0,
            Self::Parse => 15.0,
            Self::ExtractGraph => 30.0,
            Self::FetchRelated => 50.0,
            Self::Classify => 65.0,
            Self::Assess => 85.0,
            Self::Done => 100.0,
            Self::Error | Self::Cancelled => return None,
        })
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Done | Self::Error | Self::Cancelled)
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub stage: Stage,
    pub percent: f64,
    pub message: String,
    /// Unix milliseconds from the pipeline clock.
    pub timestamp: u64,
    /// For `error` events: the stage that failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
}

impl ProgressEvent {
    /// The terminal event for an outcome. `last_percent` is the last
    /// percentage already reported, kept by error and cancelled events.
    pub fn terminal<T>(outcome: &Result<T, PipelineError>, last_percent: f64, timestamp: u64) -> Self {
        let (stage, message, failed_stage) = match outcome {
            Ok(_) => (Stage::Done, "Evaluation complete".to_string(), None),
            Err(PipelineError::Cancelled) => (Stage::Cancelled, "Evaluation cancelled".to_string(), None),
            Err(e) => (Stage::Error, e.to_string(), e.stage()),
        };
        Self {
            stage,
            percent: stage.percent().unwrap_or(last_percent),
            message,
            timestamp,
            failed_stage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSettings {
    /// Cited papers kept after similarity filtering.
    pub k_citations: usize,
    /// Recommended papers requested as semantic candidates.
    pub k_recommended: usize,
    /// Semantic neighbours kept after matching.
    pub k_related: usize,
    pub k_samples: usize,
    /// Drop semantic candidates published after the main paper.
    pub filter_by_date: bool,
    /// Empty means the gateway's default model.
    pub model_id: String,
    pub ablation: Ablation,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            k_citations: 20,
            k_recommended: 30,
            k_related: 10,
            k_samples: 5,
            filter_by_date: true,
            model_id: String::new(),
            ablation: Ablation::FULL,
        }
    }
}

impl EvaluationSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let checks = [
            ("k_citations", self.k_citations, MAX_K_CITATIONS),
            ("k_recommended", self.k_recommended, MAX_K_RECOMMENDED),
            ("k_related", self.k_related, MAX_K_RELATED),
            ("k_samples", self.k_samples, MAX_K_SAMPLES),
        ];
        for (name, v, max) in checks {
            if v == 0 || v > max {
                return Err(PipelineError::Invalid(format!("{name} must be in 1..={max}, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PipelineError {
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("{stage}: {source}")]
    Ingest { stage: Stage, source: IngestError },
    #[error("{stage}: {message}")]
    Failed { stage: Stage, message: String },
    #[error("cancelled")]
    Cancelled,
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Self::Ingest { stage, .. } | Self::Failed { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    fn failed(stage: Stage, message: impl std::fmt::Display) -> Self {
        Self::Failed {
            stage,
            message: message.to_string(),
        }
    }

    fn ingest(stage: Stage, e: IngestError) -> Self {
        Self::Ingest { stage, source: e }
    }

    fn retrieval(stage: Stage, e: RetrievalError) -> Self {
        match e {
            RetrievalError::Cancelled => Self::Cancelled,
            other => Self::failed(stage, other),
        }
    }
}

impl From<AssessError> for PipelineError {
    fn from(e: AssessError) -> Self {
        match e {
            AssessError::Cancelled => Self::Cancelled,
            other => Self::failed(Stage::Assess, other),
        }
    }
}

/// Everything an evaluation produced. Contains no wall-clock data, so equal
/// inputs serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub pipeline_version: String,
    pub settings: EvaluationSettings,
    pub paper: PaperRecord,
    /// Absent in abstract-only mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PaperGraph>,
    /// Graph node ids whose excerpt was replaced by the closest sentence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged_excerpts: Vec<String>,
    /// Number of citation sentences found in the full text.
    pub citation_contexts: usize,
    pub related: Vec<RelatedPaper>,
    pub report: NoveltyReport,
}

/// Title normalised for matching bibliography entries to metadata records:
/// lowercase alphanumeric words separated by single spaces.
pub fn normalize_title(title: &str) -> String {
    title
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Pair each cited record with the contexts of the bibliography entry of the
/// same normalised title. Records without contexts are left out; keys
/// without a matching record are ignored. Keeps `cited` order.
pub fn match_citations(
    cited: &[PaperRecord],
    bib: &Bibliography,
    contexts: &[CitationContext],
) -> Vec<(PaperRecord, Vec<CitationContext>)> {
    let mut by_title: BTreeMap<String, Vec<CitationContext>> = BTreeMap::new();
    for ctx in contexts {
        if let Some(entry) = bib.get(&ctx.citation_key) {
            let t = normalize_title(&entry.title);
            if !t.is_empty() {
                by_title.entry(t).or_default().push(ctx.clone());
            }
        }
    }
    cited
        .iter()
        .filter_map(|r| {
            let ctxs = by_title.get(&normalize_title(&r.title))?;
            Some((r.clone(), ctxs.clone()))
        })
        .collect()
}

/// Stable identifier for a paper known only by title and abstract.
pub fn abstract_paper_id(title: &str, abstract_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(title.trim().as_bytes());
    h.update([0]);
    h.update(abstract_text.trim().as_bytes());
    format!("abstract:{}", &hex::encode(h.finalize())[..16])
}

/// Progress callback.
pub type ProgressFn<'a> = &'a (dyn Fn(ProgressEvent) + Send + Sync);

/// The shared, reusable parts of the pipeline. Cheap to clone.
#[derive(Clone)]
pub struct Pipeline {
    arxiv: ArxivClient,
    scholar: ScholarClient,
    gateway: Arc<Gateway>,
    embedder: Arc<dyn Embedder>,
    clock: Arc<dyn Clock>,
    parallelism: usize,
    tie: TieBreak,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("parallelism", &self.parallelism).finish()
    }
}

struct Run<'a> {
    clock: &'a dyn Clock,
    progress: ProgressFn<'a>,
    cancel: &'a CancellationToken,
}

impl Run<'_> {
    fn enter(&self, stage: Stage, message: impl Into<String>) -> Result<(), PipelineError> {
        if self.cancel.is_cancelled() {
            return Err(PipelineError::Cancelled);
        }
        (self.progress)(ProgressEvent {
            stage,
            percent: stage.percent().unwrap_or_default(),
            message: message.into(),
            timestamp: self.clock.now_millis(),
            failed_stage: None,
        });
        Ok(())
    }

    /// Race `fut` against cancellation.
    async fn guard<T>(&self, fut: impl Future<Output = Result<T, PipelineError>>) -> Result<T, PipelineError> {
        tokio::select! {
            biased;
            _ = self.cancel.cancelled() => Err(PipelineError::Cancelled),
            r = fut => r,
        }
    }
}

/// What the related-work stages start from.
struct Seeds {
    citations: Vec<(PaperRecord, Vec<CitationContext>)>,
    batch: Option<RecommendationBatch>,
}

impl Pipeline {
    pub fn new(
        arxiv: ArxivClient,
        scholar: ScholarClient,
        gateway: Arc<Gateway>,
        embedder: Arc<dyn Embedder>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            arxiv,
            scholar,
            gateway,
            embedder,
            clock,
            parallelism: DEFAULT_PARALLELISM,
            tie: TieBreak::default(),
        }
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }

    pub fn with_tie_break(mut self, tie: TieBreak) -> Self {
        self.tie = tie;
        self
    }

    pub fn arxiv(&self) -> &ArxivClient {
        &self.arxiv
    }

    pub fn scholar(&self) -> &ScholarClient {
        &self.scholar
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Settings with the model filled in, validated against the gateway.
    pub fn resolve(&self, settings: &EvaluationSettings) -> Result<EvaluationSettings, PipelineError> {
        settings.validate()?;
        let mut s = settings.clone();
        if s.model_id.trim().is_empty() {
            s.model_id = self
                .gateway
                .default_model()
                .ok_or_else(|| PipelineError::Invalid("no model given and no default configured".into()))?
                .to_string();
        }
        if !self.gateway.has_model(&s.model_id) {
            return Err(PipelineError::Invalid(format!("unknown model {}", s.model_id)));
        }
        Ok(s)
    }

    fn session(&self, settings: &EvaluationSettings, cancel: &CancellationToken) -> Result<LlmSession, PipelineError> {
        self.gateway
            .session(&settings.model_id)
            .map(|s| s.with_cancel(cancel.clone()))
            .map_err(|e| PipelineError::Invalid(e.to_string()))
    }

    /// Full evaluation of an arXiv paper. Falls back to abstract-only mode
    /// when arXiv offers no LaTeX source.
    pub async fn evaluate_arxiv(
        &self,
        arxiv_id: &str,
        settings: &EvaluationSettings,
        progress: ProgressFn<'_>,
        cancel: &CancellationToken,
    ) -> Result<EvaluationResult, PipelineError> {
        let settings = self.resolve(settings)?;
        let arxiv_id = arxiv_id.trim();
        if !is_valid_arxiv_id(arxiv_id) {
            return Err(PipelineError::Invalid(format!("malformed arXiv identifier {arxiv_id:?}")));
        }
        let llm = self.session(&settings, cancel)?;
        let run = Run {
            clock: self.clock.as_ref(),
            progress,
            cancel,
        };

        run.enter(Stage::FetchPaper, format!("Fetching arXiv:{arxiv_id}"))?;
        let (meta, latex) = run
            .guard(async {
                let s2_id = format!("arXiv:{arxiv_id}");
                let (meta, latex) = tokio::join!(self.scholar.fetch_metadata(&s2_id), self.arxiv.fetch_latex(arxiv_id));
                Ok((meta, latex))
            })
            .await?;
        let (mut paper, cited) = meta.map_err(|e| PipelineError::ingest(Stage::FetchPaper, e))?;
        paper.arxiv_id.get_or_insert_with(|| arxiv_id.to_string());
        let bundle = match latex {
            Ok(b) => Some(b),
            Err(IngestError::SourceUnavailable(_)) => {
                tracing::warn!(arxiv_id, "no LaTeX source; evaluating from the abstract");
                None
            }
            Err(e) => return Err(PipelineError::ingest(Stage::FetchPaper, e)),
        };

        let Some(bundle) = bundle else {
            run.enter(Stage::Parse, "No LaTeX source available; continuing from the abstract")?;
            run.enter(Stage::ExtractGraph, "Skipped: no full text")?;
            run.enter(Stage::FetchRelated, "Fetching recommended papers")?;
            let batch = self.recommendations(&run, &paper, &settings).await?;
            let seeds = Seeds {
                citations: Vec::new(),
                batch,
            };
            return self.finish(&run, &llm, settings, paper, None, Vec::new(), 0, seeds).await;
        };

        run.enter(Stage::Parse, "Converting LaTeX and reading the bibliography")?;
        let conversion = to_plain_text(&bundle).map_err(|e| PipelineError::failed(Stage::Parse, e))?;
        for w in &conversion.warnings {
            tracing::warn!(arxiv_id, "latex: {w}");
        }
        let doc = conversion.document;
        let bib = match parse_bibliography(&bundle) {
            Ok(b) => b,
            Err(TexError::NoBibliography) => {
                tracing::warn!(arxiv_id, "no bibliography; continuing without citations");
                Bibliography::default()
            }
            Err(e) => return Err(PipelineError::failed(Stage::Parse, e)),
        };
        let contexts = extract_citation_contexts(&doc, &bib);

        run.enter(Stage::ExtractGraph, "Extracting the paper graph")?;
        let extraction = run
            .guard(async {
                extract_graph(&doc, &paper.title, &llm).await.map_err(|e| match e {
                    GraphError::Llm(LlmError::Cancelled) => PipelineError::Cancelled,
                    other => PipelineError::failed(Stage::ExtractGraph, other),
                })
            })
            .await?;

        run.enter(Stage::FetchRelated, "Fetching cited and recommended papers")?;
        let citations = if settings.ablation.uses_citations() {
            match_citations(&cited, &bib, &contexts)
        } else {
            Vec::new()
        };
        let batch = self.recommendations(&run, &paper, &settings).await?;
        let seeds = Seeds { citations, batch };
        self.finish(
            &run,
            &llm,
            settings,
            paper,
            Some(extraction.graph),
            extraction.flagged,
            contexts.len(),
            seeds,
        )
        .await
    }

    /// Evaluation from a title and abstract only. Related work is seeded by a
    /// relevance search on the title; a hit with the same title is taken to
    /// be the paper itself and dropped.
    pub async fn evaluate_abstract(
        &self,
        title: &str,
        abstract_text: &str,
        settings: &EvaluationSettings,
        progress: ProgressFn<'_>,
        cancel: &CancellationToken,
    ) -> Result<EvaluationResult, PipelineError> {
        let (title, abstract_text) = (title.trim(), abstract_text.trim());
        if title.is_empty() || abstract_text.is_empty() {
            return Err(PipelineError::Invalid("title and abstract must both be nonempty".into()));
        }
        let settings = self.resolve(settings)?;
        let llm = self.session(&settings, cancel)?;
        let run = Run {
            clock: self.clock.as_ref(),
            progress,
            cancel,
        };

        run.enter(Stage::FetchPaper, "Using the supplied title and abstract")?;
        let mut paper = PaperRecord::new(abstract_paper_id(title, abstract_text), title);
        paper.abstract_text = abstract_text.to_string();
        run.enter(Stage::Parse, "Skipped: abstract only")?;
        run.enter(Stage::ExtractGraph, "Skipped: abstract only")?;

        run.enter(Stage::FetchRelated, "Searching for related papers")?;
        let batch = if settings.ablation.uses_semantic() {
            let hits = run
                .guard(async {
                    self.scholar
                        .search(title, settings.k_recommended)
                        .await
                        .map_err(|e| PipelineError::ingest(Stage::FetchRelated, e))
                })
                .await?;
            let own = normalize_title(title);
            let hits: Vec<PaperRecord> = hits.into_iter().filter(|h| normalize_title(&h.title) != own).collect();
            Some(RecommendationBatch::new(paper.id.clone(), hits, settings.k_recommended))
        } else {
            None
        };
        let seeds = Seeds {
            citations: Vec::new(),
            batch,
        };
        self.finish(&run, &llm, settings, paper, None, Vec::new(), 0, seeds).await
    }

    async fn recommendations(
        &self,
        run: &Run<'_>,
        paper: &PaperRecord,
        settings: &EvaluationSettings,
    ) -> Result<Option<RecommendationBatch>, PipelineError> {
        if !settings.ablation.uses_semantic() {
            return Ok(None);
        }
        run.guard(async {
            self.scholar
                .fetch_recommendations(&paper.id, settings.k_recommended)
                .await
                .map(Some)
                .map_err(|e| PipelineError::ingest(Stage::FetchRelated, e))
        })
        .await
    }

    #[allow(clippy::too_many_arguments)]
    async fn finish(
        &self,
        run: &Run<'_>,
        llm: &LlmSession,
        settings: EvaluationSettings,
        paper: PaperRecord,
        graph: Option<PaperGraph>,
        flagged_excerpts: Vec<String>,
        citation_contexts: usize,
        seeds: Seeds,
    ) -> Result<EvaluationResult, PipelineError> {
        run.enter(Stage::Classify, "Ranking and classifying related papers")?;
        let related = run.guard(self.related(llm, &paper, &settings, seeds)).await?;

        run.enter(Stage::Assess, "Scoring novelty and writing the report")?;
        let abstract_only = graph.is_none();
        let graph_text = match &graph {
            Some(g) if !settings.ablation.no_graph => {
                linearize(g).map_err(|e| PipelineError::failed(Stage::Assess, e))?
            }
            _ => String::new(),
        };
        let report = run
            .guard(async {
                Ok(generate_report_from_text(&paper, &graph_text, abstract_only, &related, llm, settings.k_samples)
                    .await?)
            })
            .await?;

        Ok(EvaluationResult {
            pipeline_version: PIPELINE_VERSION.to_string(),
            settings,
            paper,
            graph,
            flagged_excerpts,
            citation_contexts,
            related,
            report,
        })
    }

    /// Citation filtering and polarity, semantic matching, then a relation
    /// summary for every kept paper. A paper found both ways is kept as a
    /// citation.
    async fn related(
        &self,
        llm: &LlmSession,
        paper: &PaperRecord,
        settings: &EvaluationSettings,
        seeds: Seeds,
    ) -> Result<Vec<RelatedPaper>, PipelineError> {
        let mut related = Vec::new();
        if !seeds.citations.is_empty() {
            let records: Vec<PaperRecord> = seeds.citations.iter().map(|(r, _)| r.clone()).collect();
            let kept = filter_citations(self.embedder.as_ref(), paper, &records, settings.k_citations)
                .await
                .map_err(|e| PipelineError::retrieval(Stage::Classify, e))?;
            let contexts: BTreeMap<&str, &Vec<CitationContext>> =
                seeds.citations.iter().map(|(r, c)| (r.id.as_str(), c)).collect();
            let candidates = kept
                .into_iter()
                .map(|(record, raw_similarity)| CitationCandidate {
                    contexts: contexts[record.id.as_str()].clone(),
                    record,
                    raw_similarity,
                })
                .collect();
            related = classify_citations(candidates, llm, self.parallelism, self.tie)
                .await
                .map_err(|e| PipelineError::retrieval(Stage::Classify, e))?;
        }

        if let Some(batch) = seeds.batch.filter(|b| !b.papers.is_empty()) {
            if paper.abstract_text.trim().is_empty() {
                tracing::warn!(id = %paper.id, "paper has no abstract; semantic matching skipped");
            } else {
                let terms = decompose_abstract(&paper.abstract_text, llm)
                    .await
                    .map_err(|e| PipelineError::retrieval(Stage::Classify, e))?;
                let cutoff = if settings.filter_by_date { paper.year } else { None };
                let semantic = match_semantic(
                    &terms,
                    &batch,
                    settings.k_related,
                    llm,
                    self.embedder.as_ref(),
                    cutoff,
                    self.parallelism,
                )
                .await
                .map_err(|e| PipelineError::retrieval(Stage::Classify, e))?;
                let seen: HashSet<String> = related.iter().map(|r| r.id().to_string()).collect();
                related.extend(semantic.into_iter().filter(|r| !seen.contains(r.id())));
            }
        }

        let summaries: Vec<Result<String, RetrievalError>> = stream::iter(0..related.len())
            .map(|i| summarize_relation(paper, &related[i], llm))
            .buffered(self.parallelism)
            .collect()
            .await;
        for (r, s) in related.iter_mut().zip(summaries) {
            r.summary = s.map_err(|e| PipelineError::retrieval(Stage::Classify, e))?;
        }
        Ok(related)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn titles_normalise() {
        assert_eq!(normalize_title("  {BERT}: Pre-training of Deep\nTransformers "), "bert pre training of deep transformers");
        assert_eq!(normalize_title("---"), "");
    }

    #[test]
    fn percents_increase_through_the_stages() {
        let p: Vec<f64> = Stage::ORDER.iter().map(|s| s.percent().unwrap()).collect();
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Stage::Done.percent(), Some(100.0));
        assert!(Stage::Error.percent().is_none());
    }

    #[test]
    fn terminal_events() {
        let err: Result<(), _> = Err(PipelineError::failed(Stage::ExtractGraph, "boom"));
        let e = ProgressEvent::terminal(&err, 30.0, 7);
        assert_eq!((e.stage, e.percent, e.failed_stage), (Stage::Error, 30.0, Some(Stage::ExtractGraph)));
        assert_eq!(e.message, "extract_graph: boom");
        let ok: Result<(), PipelineError> = Ok(());
        assert_eq!(ProgressEvent::terminal(&ok, 85.0, 7).percent, 100.0);
    }

    #[test]
    fn settings_bounds() {
        assert!(EvaluationSettings::default().validate().is_ok());
        let bad = EvaluationSettings {
            k_samples: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(PipelineError::Invalid(_))));
    }

    #[test]
    fn abstract_ids_are_stable() {
        assert_eq!(abstract_paper_id("T", "A"), abstract_paper_id(" T ", "A\n"));
        assert_ne!(abstract_paper_id("T", "A"), abstract_paper_id("T", "B"));
    }
}
