//! Bradley-Terry strengths by minorization-maximization.
//!
//! Each system also plays one virtual game against a phantom of strength 1,
//! winning half of it. That keeps the maximum-likelihood estimate finite when
//! a system wins or loses every comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Dimension, EvalError, PairwiseJudgment};

pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 10_000;
const PHANTOM_STRENGTH: f64 = 1.0;
const PHANTOM_WINS: f64 = 0.5;

/// `1500 + 400·log10(strength)`.
pub fn display_rating(strength: f64) -> f64 {
    1500.0 + 400.0 * strength.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub strength: f64,
    pub display_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtFit {
    pub ratings: BTreeMap<String, Rating>,
    pub iterations: usize,
    pub converged: bool,
    /// Regularized log-likelihood before the first update and after each one.
    pub log_likelihood: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BTRatings {
    pub dimensions: BTreeMap<Dimension, BTreeMap<String, Rating>>,
}

/// Win counts between systems, indexed by position in `systems`.
struct Tally {
    systems: Vec<String>,
    /// wins[i][j]: times i beat j.
    wins: Vec<Vec<f64>>,
}

impl Tally {
    fn new(judgments: &[PairwiseJudgment]) -> Self {
        let systems: Vec<String> = judgments
            .iter()
            .flat_map(|j| [j.system_a.clone(), j.system_b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index = |s: &str| systems.binary_search_by(|x| x.as_str().cmp(s)).unwrap();
        let mut wins = vec![vec![0.0; systems.len()]; systems.len()];
        for j in judgments {
            let (w, l) = (index(j.winner_id()), index(j.loser_id()));
            wins[w][l] += 1.0;
        }
        Self { systems, wins }
    }

    fn n(&self) -> usize {
        self.systems.len()
    }

    fn components(&self) -> Vec<Vec<String>> {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for i in 0..n {
            for j in 0..n {
                if self.wins[i][j] > 0.0 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(self.systems[i].clone());
        }
        let mut out: Vec<Vec<String>> = groups.into_values().collect();
        out.sort();
        out
    }

    fn log_likelihood(&self, p: &[f64]) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.n() {
            for j in 0..self.n() {
                if self.wins[i][j] > 0.0 {
                    ll += self.wins[i][j] * (p[i] / (p[i] + p[j])).ln();
                }
            }
            ll += PHANTOM_WINS * (p[i] / (p[i] + PHANTOM_STRENGTH)).ln();
            ll += PHANTOM_WINS * (PHANTOM_STRENGTH / (p[i] + PHANTOM_STRENGTH)).ln();
        }
        ll
    }
}

/// Regularized log-likelihood of `strengths` (unnormalized) given judgments.
pub fn log_likelihood(judgments: &[PairwiseJudgment], strengths: &BTreeMap<String, f64>) -> f64 {
    let tally = Tally::new(judgments);
    let p: Vec<f64> = tally.systems.iter().map(|s| strengths[s]).collect();
    tally.log_likelihood(&p)
}

/// Fit one dimension. All judgments are assumed to share it.
pub fn fit_dimension(judgments: &[PairwiseJudgment]) -> Result<BtFit, EvalError> {
    if judgments.is_empty() {
        return Err(EvalError::NoJudgments);
    }
    let tally = Tally::new(judgments);
    let components = tally.components();
    if components.len() > 1 {
        return Err(EvalError::DisconnectedGraph {
            dimension: judgments[0].dimension.as_str().to_string(),
            components,
        });
    }
    let n = tally.n();
    let games: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| tally.wins[i][j] + tally.wins[j][i]).collect())
        .collect();
    let total_wins: Vec<f64> = (0..n)
        .map(|i| tally.wins[i].iter().sum::<f64>() + PHANTOM_WINS)
        .collect();

    let mut p = vec![1.0; n];
    let mut trace = vec![tally.log_likelihood(&p)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let mut denom = 2.0 * PHANTOM_WINS / (p[i] + PHANTOM_STRENGTH);
                for j in 0..n {
                    if j != i && games[i][j] > 0.0 {
                        denom += games[i][j] / (p[i] + p[j]);
                    }
                }
                total_wins[i] / denom
            })
            .collect();
        let change = next
            .iter()
            .zip(&p)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        p = next;
        trace.push(tally.log_likelihood(&p));
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }

    let mean = p.iter().sum::<f64>() / n as f64;
    let ratings = tally
        .systems
        .iter()
        .zip(&p)
        .map(|(s, &v)| {
            let strength = v / mean;
            (
                s.clone(),
                Rating {
                    strength,
                    display_rating: display_rating(strength),
                },
            )
        })
        .collect();
    Ok(BtFit {
        ratings,
        iterations,
        converged,
        log_likelihood: trace,
    })
}

/// Fit every dimension present in `judgments`, in parallel. The first
/// dimension (in order) that cannot be fitted fails the whole call; use
/// [`fit_dimension`] to handle dimensions separately.
pub fn fit_bradley_terry(judgments: &[PairwiseJudgment]) -> Result<BTRatings, EvalError> {
    if judgments.is_empty() {
        return Err(EvalError::NoJudgments);
    }
    let mut by_dim: BTreeMap<Dimension, Vec<PairwiseJudgment>> = BTreeMap::new();
    for j in judgments {
        by_dim.entry(j.dimension).or_default().push(j.clone());
    }
    let fits: Vec<(Dimension, Result<BtFit, EvalError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = by_dim
            .iter()
            .map(|(d, js)| (*d, scope.spawn(move || fit_dimension(js))))
            .collect();
        handles
            .into_iter()
            .map(|(d, h)| (d, h.join().expect("fitting does not panic")))
            .collect()
    });
    let mut out = BTRatings::default();
    for (d, fit) in fits {
        out.dimensions.insert(d, fit?.ratings);
    }
    Ok(out)
}
