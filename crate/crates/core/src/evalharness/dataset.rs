//! Running a labelled dataset through an evaluator under ablation variants.

use std::future::Future;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::{compute_metrics, EvalError, GroundTruth, Metrics};
use crate::assess::NoveltyLabel;

/// Pipeline components to switch off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Drop citation-derived related papers.
    pub no_citation: bool,
    /// Drop semantically matched related papers.
    pub no_semantic: bool,
    /// Drop all related papers.
    pub no_related: bool,
    /// Do not show the model the paper graph.
    pub no_graph: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        no_citation: false,
        no_semantic: false,
        no_related: false,
        no_graph: false,
    };

    /// The full system followed by each single ablation.
    pub fn variants() -> Vec<(&'static str, Ablation)> {
        vec![
            ("Full", Self::FULL),
            ("No citation", Ablation { no_citation: true, ..Self::FULL }),
            ("No semantic", Ablation { no_semantic: true, ..Self::FULL }),
            ("No related", Ablation { no_related: true, ..Self::FULL }),
            ("No graph", Ablation { no_graph: true, ..Self::FULL }),
        ]
    }

    pub fn uses_citations(&self) -> bool {
        !self.no_citation && !self.no_related
    }

    pub fn uses_semantic(&self) -> bool {
        !self.no_semantic && !self.no_related
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub paper_id: String,
    pub truth: NoveltyLabel,
    /// `None` when the evaluator failed on this paper.
    pub predicted: Option<NoveltyLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetOutcome {
    pub variant: String,
    pub ablation: Ablation,
    /// Over papers with a prediction; `None` if there were none.
    pub metrics: Option<Metrics>,
    pub failures: usize,
    pub predictions: Vec<Prediction>,
}

/// Evaluate every paper under every variant, `parallelism` papers at a time.
/// Papers the evaluator fails on are reported and left out of the metrics.
pub async fn run_dataset<F, Fut>(
    truth: &[GroundTruth],
    variants: &[(String, Ablation)],
    parallelism: usize,
    evaluate: F,
) -> Result<Vec<DatasetOutcome>, EvalError>
where
    F: Fn(GroundTruth, Ablation) -> Fut,
    Fut: Future<Output = Result<NoveltyLabel, String>>,
{
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut out = Vec::with_capacity(variants.len());
    for (name, ablation) in variants {
        let predictions: Vec<Prediction> = stream::iter(truth.iter().cloned())
            .map(|gt| {
                let fut = evaluate(gt.clone(), *ablation);
                async move {
                    let r = fut.await;
                    Prediction {
                        paper_id: gt.paper_id,
                        truth: gt.label,
                        predicted: r.as_ref().ok().copied(),
                        error: r.err(),
                    }
                }
            })
            .buffered(parallelism.max(1))
            .collect()
            .await;
        let (pred, gold): (Vec<NoveltyLabel>, Vec<NoveltyLabel>) = predictions
            .iter()
            .filter_map(|p| p.predicted.map(|l| (l, p.truth)))
            .unzip();
        let metrics = if pred.is_empty() {
            None
        } else {
            Some(compute_metrics(&pred, &gold)?)
        };
        out.push(DatasetOutcome {
            variant: name.clone(),
            ablation: *ablation,
            metrics,
            failures: predictions.iter().filter(|p| p.predicted.is_none()).count(),
            predictions,
        });
    }
    Ok(out)
}
