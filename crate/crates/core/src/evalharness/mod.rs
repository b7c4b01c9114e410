//! The evaluation protocol: binarized peer-review ground truth,
//! classification metrics, ablation runs over a dataset and the pairwise
//! rationale tournament with Bradley-Terry ratings.

mod bt;
mod dataset;
mod tables;
mod tournament;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assess::NoveltyLabel;

pub use bt::{
    display_rating, fit_bradley_terry, fit_dimension, log_likelihood, BTRatings, BtFit, Rating,
    MAX_ITERATIONS, TOLERANCE,
};
pub use dataset::{run_dataset, Ablation, DatasetOutcome, Prediction};
pub use tables::{distribution, format_distribution, format_metrics, format_ratings, YearRow};
pub use tournament::{run_tournament, Dimension, PairwiseJudgment, Winner};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("no scores")]
    EmptyScores,
    #[error("score {0} outside 1..=5")]
    OutOfRange(u8),
    #[error("predictions ({0}) and truth ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("no judgments")]
    NoJudgments,
    #[error("comparison graph for {dimension} is disconnected: {components:?}")]
    DisconnectedGraph {
        dimension: String,
        components: Vec<Vec<String>>,
    },
    #[error("a tournament needs at least two systems")]
    TooFewSystems,
    #[error("ground truth line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("cancelled")]
    Cancelled,
}

/// Median and label for one paper's originality scores. Even-length lists
/// take the midpoint of the middle pair; novel iff the median is at least 4.
pub fn binarize(scores: &[u8]) -> Result<(f64, NoveltyLabel), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    if let Some(&bad) = scores.iter().find(|s| !(1..=5).contains(*s)) {
        return Err(EvalError::OutOfRange(bad));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let median = if n % 2 == 1 {
        f64::from(sorted[n / 2])
    } else {
        (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2])) / 2.0
    };
    let label = if median >= 4.0 {
        NoveltyLabel::Novel
    } else {
        NoveltyLabel::NotNovel
    };
    Ok((median, label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub paper_id: String,
    pub originality_scores: Vec<u8>,
    pub median: f64,
    pub label: NoveltyLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

/// One line of a ground-truth file.
#[derive(Debug, Deserialize)]
struct Record {
    id: String,
    scores: Vec<u8>,
    #[serde(default)]
    venue: Option<String>,
    #[serde(default)]
    year: Option<i32>,
}

impl GroundTruth {
    pub fn new(paper_id: impl Into<String>, scores: Vec<u8>) -> Result<Self, EvalError> {
        let (median, label) = binarize(&scores)?;
        Ok(Self {
            paper_id: paper_id.into(),
            originality_scores: scores,
            median,
            label,
            venue: None,
            year: None,
        })
    }

    /// Parse line-delimited JSON records `{"id", "scores", "venue", "year"}`.
    /// Blank lines are skipped.
    pub fn parse_jsonl(text: &str) -> Result<Vec<Self>, EvalError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| EvalError::BadRecord { line: i + 1, message };
            let r: Record = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let mut gt = Self::new(r.id, r.scores).map_err(|e| bad(e.to_string()))?;
            gt.venue = r.venue;
            gt.year = r.year;
            out.push(gt);
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vec<Self>, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_jsonl(&text)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Every metric is a single division of integer counts, so each value is
    /// the correctly rounded image of the exact rational.
    pub fn from_confusion(c: Confusion) -> Self {
        Self {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn)
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
            accuracy: ratio(c.tp + c.tn, c.total()),
            confusion: c,
        }
    }
}

/// Novel is the positive class.
pub fn compute_metrics(predictions: &[NoveltyLabel], truth: &[NoveltyLabel]) -> Result<Metrics, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), truth.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = Confusion::default();
    for (p, t) in predictions.iter().zip(truth) {
        match (p.is_novel(), t.is_novel()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(Metrics::from_confusion(c))
}
