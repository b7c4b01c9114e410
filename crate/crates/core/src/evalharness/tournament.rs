//! Pairwise comparison of rationales by a model judge.

use std::collections::BTreeMap;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::EvalError;
use crate::llm::{prompts, LlmError, LlmSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Clarity,
    Faithfulness,
    Factuality,
    Specificity,
    Contributions,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Self::Clarity,
        Self::Faithfulness,
        Self::Factuality,
        Self::Specificity,
        Self::Contributions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clarity => "clarity",
            Self::Faithfulness => "faithfulness",
            Self::Factuality => "factuality",
            Self::Specificity => "specificity",
            Self::Contributions => "contributions",
        }
    }

    /// What the judge is asked to look for.
    pub fn definition(self) -> &'static str {
        match self {
            Self::Clarity => "A reader can follow the rationale without effort: it is well organised, plainly worded and free of ambiguity.",
            Self::Faithfulness => "The rationale stays consistent with what the paper actually says and with its own verdict, without contradicting itself.",
            Self::Factuality => "Statements about the paper and about related work are correct and supported by the available evidence.",
            Self::Specificity => "The rationale points to concrete methods, results or related papers instead of generic remarks that would fit any paper.",
            Self::Contributions => "The rationale identifies what the paper adds beyond prior work and weighs how significant that addition is.",
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
}

/// One comparison; `system_a` was presented first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseJudgment {
    pub dimension: Dimension,
    pub system_a: String,
    pub system_b: String,
    pub winner: Winner,
}

impl PairwiseJudgment {
    pub fn winner_id(&self) -> &str {
        match self.winner {
            Winner::A => &self.system_a,
            Winner::B => &self.system_b,
        }
    }

    pub fn loser_id(&self) -> &str {
        match self.winner {
            Winner::A => &self.system_b,
            Winner::B => &self.system_a,
        }
    }
}

/// Every unordered pair of systems is judged twice per dimension, once in
/// each presentation order. Judgments the model fails to produce are skipped.
/// Output order: dimension, pair (by system id), then the two orders.
pub async fn run_tournament(
    paper_title: &str,
    rationales: &BTreeMap<String, String>,
    dimensions: &[Dimension],
    llm: &LlmSession,
) -> Result<Vec<PairwiseJudgment>, EvalError> {
    if rationales.len() < 2 {
        return Err(EvalError::TooFewSystems);
    }
    let systems: Vec<&String> = rationales.keys().collect();
    let mut matches = Vec::new();
    for &dimension in dimensions {
        for (i, a) in systems.iter().enumerate() {
            for b in &systems[i + 1..] {
                matches.push((dimension, *a, *b));
                matches.push((dimension, *b, *a));
            }
        }
    }
    let results = join_all(matches.iter().enumerate().map(|(seed, (dimension, first, second))| {
        let req = llm
            .request(
                &prompts::PAIRWISE_JUDGMENT,
                &[
                    ("dimension", dimension.as_str()),
                    ("definition", dimension.definition()),
                    ("title", paper_title),
                    ("first", &rationales[*first]),
                    ("second", &rationales[*second]),
                ],
            )
            .temperature(0.0)
            .seed(seed as u64)
            .payload(json!({"first": rationales[*first], "second": rationales[*second]}));
        async move { llm.complete(&req).await }
    }))
    .await;

    let mut out = Vec::with_capacity(matches.len());
    for ((dimension, first, second), result) in matches.into_iter().zip(results) {
        let winner = match result {
            Ok(resp) => match resp.content["winner"].as_str() {
                Some("first") => Winner::A,
                Some("second") => Winner::B,
                other => {
                    tracing::warn!(%dimension, "judge answered {other:?}; judgment skipped");
                    continue;
                }
            },
            Err(LlmError::Cancelled) => return Err(EvalError::Cancelled),
            Err(e) => {
                tracing::warn!(%dimension, %first, %second, "judgment skipped: {e}");
                continue;
            }
        };
        out.push(PairwiseJudgment {
            dimension,
            system_a: first.clone(),
            system_b: second.clone(),
            winner,
        });
    }
    Ok(out)
}
