//! Pairwise ranking of score-matrix columns.
//!
//! For every score matrix with true class `l` and every other class `j`,
//! the difference `s_l - s_j` of their columns is a positive example and
//! the mirrored difference a negative one. A linear soft-margin classifier
//! on these differences,
//!
//! ```text
//! min_w ‖w‖² + C Σ_i max(0, 1 - y_i wᵀx_i)
//! ```
//!
//! yields fusion weights under which the true class outranks the rest.

use log::debug;
use serde::{Deserialize, Serialize};

use super::{FusionWeights, ScoreMatrix, NUM_MODELS};
use crate::error::{Error, Result};

/// Difference of two score-matrix columns with its orientation label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPair {
    pub x: [f64; NUM_MODELS],
    /// `+1.0` if the first column should rank higher, `-1.0` otherwise.
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    /// Slack penalty.
    pub c: f64,
    /// Subgradient steps per (re)training round.
    pub iterations: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            c: 1.0,
            iterations: 10_000,
        }
    }
}

/// Result of the non-negative fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegFit {
    pub weights: FusionWeights,
    /// Training rounds run (first unconstrained fit included).
    pub rounds: usize,
    pub objective: f64,
}

/// Emits `(s_l - s_j, +1)` and `(s_j - s_l, -1)` for every matrix and every
/// class `j ≠ l`. Labels are zero-based.
pub fn build_pairs(matrices: &[(ScoreMatrix, usize)]) -> Result<Vec<RankPair>> {
    let mut pairs = Vec::new();
    for (idx, (s, label)) in matrices.iter().enumerate() {
        let m = s.num_classes();
        if *label >= m {
            return Err(Error::InvalidInput(format!(
                "score matrix {idx}: label {} outside 1..={m}",
                label + 1
            )));
        }
        let truth = s.column(*label);
        for j in (0..m).filter(|j| j != label) {
            let other = s.column(j);
            let x: [f64; NUM_MODELS] = std::array::from_fn(|p| truth[p] - other[p]);
            pairs.push(RankPair { x, y: 1.0 });
            pairs.push(RankPair {
                x: x.map(|v| -v),
                y: -1.0,
            });
        }
    }
    Ok(pairs)
}

/// `‖w‖² + C Σ max(0, 1 - y wᵀx)`.
pub fn ranking_objective(w: &[f64; NUM_MODELS], pairs: &[RankPair], c: f64) -> f64 {
    let reg: f64 = w.iter().map(|v| v * v).sum();
    let slack: f64 = pairs
        .iter()
        .map(|p| (1.0 - p.y * dot4(w, &p.x)).max(0.0))
        .sum();
    reg + c * slack
}

fn dot4(a: &[f64; NUM_MODELS], b: &[f64; NUM_MODELS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unconstrained ranking weights.
pub fn train_ranker(pairs: &[RankPair], cfg: &RankerConfig) -> Result<[f64; NUM_MODELS]> {
    Ok(fit(pairs, cfg, &[true; NUM_MODELS])?.0)
}

/// Full-batch subgradient descent over the active coordinates (inactive ones
/// stay zero). The objective is 2-strongly convex, so the step at iteration
/// `t` is `1 / (2t)`. Returns the best iterate seen, starting from `w = 0`,
/// and its objective.
fn fit(
    pairs: &[RankPair],
    cfg: &RankerConfig,
    active: &[bool; NUM_MODELS],
) -> Result<([f64; NUM_MODELS], f64)> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no ranking pairs".into()));
    }
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::InvalidInput(format!("slack penalty C = {}", cfg.c)));
    }
    if let Some(p) = pairs
        .iter()
        .find(|p| p.x.iter().any(|v| !v.is_finite()) || p.y.abs() != 1.0)
    {
        return Err(Error::InvalidInput(format!("malformed ranking pair {p:?}")));
    }
    const STRONG_CONVEXITY: f64 = 2.0;
    let mut w = [0.0; NUM_MODELS];
    let mut best = (w, f64::INFINITY);
    for t in 1..=cfg.iterations + 1 {
        let mut slack = 0.0;
        let mut push = [0.0; NUM_MODELS];
        for p in pairs {
            let margin = p.y * dot4(&w, &p.x);
            if margin < 1.0 {
                slack += 1.0 - margin;
                for (acc, x) in push.iter_mut().zip(&p.x) {
                    *acc += p.y * x;
                }
            }
        }
        let objective = w.iter().map(|v| v * v).sum::<f64>() + cfg.c * slack;
        if objective < best.1 {
            best = (w, objective);
        }
        if t > cfg.iterations {
            break;
        }
        let step = 1.0 / (STRONG_CONVEXITY * t as f64);
        for p in 0..NUM_MODELS {
            if active[p] {
                let g = 2.0 * w[p] - cfg.c * push[p];
                w[p] -= step * g;
            }
        }
    }
    Ok(best)
}

/// Non-negative ranking weights: fit without constraint, zero every
/// negative weight and drop it from the active set, refit the rest, and
/// repeat until no active weight is negative. Coordinates only leave the
/// active set, so at most four rounds run.
pub fn nonneg_project_retrain(pairs: &[RankPair], cfg: &RankerConfig) -> Result<NonnegFit> {
    let mut active = [true; NUM_MODELS];
    let mut rounds = 0;
    loop {
        rounds += 1;
        let (mut w, _) = fit(pairs, cfg, &active)?;
        debug!("ranking round {rounds}: active {active:?}, w = {w:?}");
        let mut dropped = false;
        for p in 0..NUM_MODELS {
            if active[p] && w[p] < 0.0 {
                active[p] = false;
                w[p] = 0.0;
                dropped = true;
            }
        }
        if !dropped {
            let objective = ranking_objective(&w, pairs, cfg.c);
            let weights = FusionWeights::new(w)?;
            return Ok(NonnegFit {
                weights,
                rounds,
                objective,
            });
        }
        if !active.iter().any(|&a| a) {
            return Err(Error::NoPositiveModel);
        }
    }
}
