//! Score fusion: the per-timestep 4×m score matrix, the learned
//! non-negative weight vector and the weighted combination of model rows.

mod ranker;

pub use ranker::{
    build_pairs, nonneg_project_retrain, ranking_objective, train_ranker, NonnegFit, RankPair,
    RankerConfig,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, ScoreVector};

pub const NUM_MODELS: usize = 4;

/// Scores of the four models at one timestep; row `p` holds model
/// [`ModelKind::ALL`]`[p]`, column `q` holds class `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    rows: [Vec<f64>; NUM_MODELS],
}

impl ScoreMatrix {
    pub fn new(rows: [Vec<f64>; NUM_MODELS]) -> Result<Self> {
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::InvalidInput("score matrix with no classes".into()));
        }
        for (p, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::shape("score matrix row", m, row.len()));
            }
            if row.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
                return Err(Error::InvalidInput(format!(
                    "score matrix row {p} has entries outside [0, 1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "score matrix row {p} sums to {total}"
                )));
            }
        }
        Ok(ScoreMatrix { rows })
    }

    pub fn from_scores(scores: [ScoreVector; NUM_MODELS]) -> Result<Self> {
        ScoreMatrix::new(scores.map(ScoreVector::into_inner))
    }

    pub fn num_classes(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, kind: ModelKind) -> &[f64] {
        &self.rows[kind.row()]
    }

    pub fn rows(&self) -> &[Vec<f64>; NUM_MODELS] {
        &self.rows
    }

    /// Scores of all four models for class `j`.
    pub fn column(&self, j: usize) -> [f64; NUM_MODELS] {
        std::array::from_fn(|p| self.rows[p][j])
    }
}

/// Non-negative model weights, at least one strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; NUM_MODELS]", into = "[f64; NUM_MODELS]")]
pub struct FusionWeights([f64; NUM_MODELS]);

impl FusionWeights {
    pub fn new(w: [f64; NUM_MODELS]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "fusion weights must be finite and non-negative: {w:?}"
            )));
        }
        if !w.iter().any(|&v| v > 0.0) {
            return Err(Error::NoPositiveModel);
        }
        Ok(FusionWeights(w))
    }

    /// Equal weights: the score-averaging baseline.
    pub fn average() -> Self {
        FusionWeights([0.25; NUM_MODELS])
    }

    /// All weight on one model.
    pub fn select(kind: ModelKind) -> Self {
        let mut w = [0.0; NUM_MODELS];
        w[kind.row()] = 1.0;
        FusionWeights(w)
    }

    pub fn values(&self) -> [f64; NUM_MODELS] {
        self.0
    }

    pub fn get(&self, kind: ModelKind) -> f64 {
        self.0[kind.row()]
    }
}

impl TryFrom<[f64; NUM_MODELS]> for FusionWeights {
    type Error = Error;

    fn try_from(w: [f64; NUM_MODELS]) -> Result<Self> {
        FusionWeights::new(w)
    }
}

impl From<FusionWeights> for [f64; NUM_MODELS] {
    fn from(w: FusionWeights) -> Self {
        w.0
    }
}

/// Combined class scores `c_i = Σ_p w_p · s_{p,i}`.
pub fn fuse_scores(s: &ScoreMatrix, w: &FusionWeights) -> Vec<f64> {
    (0..s.num_classes())
        .map(|i| s.column(i).iter().zip(w.0).map(|(sp, wp)| wp * sp).sum())
        .collect()
}

/// On-disk form of learned weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub row_order: Vec<String>,
    pub w: FusionWeights,
    #[serde(rename = "C")]
    pub c: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl WeightsFile {
    pub fn new(w: FusionWeights, ranker: &RankerConfig, config_hash: Option<String>) -> Self {
        WeightsFile {
            row_order: ModelKind::ALL
                .iter()
                .map(|k| k.name().to_string())
                .collect(),
            w,
            c: ranker.c,
            iterations: ranker.iterations,
            config_hash,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Reads a weights file and checks its row order.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: WeightsFile = serde_json::from_str(&text)?;
        let expected: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
        if file.row_order != expected {
            return Err(Error::InvalidInput(format!(
                "weights row order {:?} differs from {expected:?}",
                file.row_order
            )));
        }
        Ok(file)
    }
}
