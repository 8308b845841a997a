//! Observation-ratio evaluation, leave-one-group-out cross-validation, the
//! synthetic dataset and the training pipeline.

mod pipeline;
mod synth;

pub use pipeline::{
    featurize_dataset, featurize_video, fit_fusion, stratified_split, train_models, train_system,
    FlowConfig, FoldPlan, FusionConfig, ModelConfig, TrainedSystem,
};
pub use synth::{generate_synthetic, RawVideo, SynthConfig, CLASS_NAMES};

use std::collections::BTreeSet;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::VideoRecord;
use crate::error::{Error, Result};
use crate::fusion::{FusionWeights, ScoreMatrix};
use crate::models::ModelSet;
use crate::prediction::{decide, video_score_matrices, vote_prefix};

pub const NUM_RATIOS: usize = 10;

/// Number of frames observed at ratio `i / 10`: `round(n·i/10)` rounded
/// half up, never less than one.
pub fn slice_observation(n: usize, i: usize) -> Result<usize> {
    if !(1..=NUM_RATIOS).contains(&i) {
        return Err(Error::InvalidInput(format!(
            "observation ratio index {i} outside 1..=10"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("cannot slice an empty video".into()));
    }
    // integer form of floor(n·i/10 + 1/2)
    Ok(((2 * n * i + NUM_RATIOS) / (2 * NUM_RATIOS)).max(1))
}

/// Accuracy at observation ratios 0.1, 0.2, ..., 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RatioTable(pub [f64; NUM_RATIOS]);

impl RatioTable {
    /// Accuracy at ratio `i / 10`.
    pub fn at(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn ratios() -> impl Iterator<Item = f64> {
        (1..=NUM_RATIOS).map(|i| i as f64 / 10.0)
    }

    /// Element-wise mean, summed in the given order.
    pub fn mean(tables: &[RatioTable]) -> Result<RatioTable> {
        if tables.is_empty() {
            return Err(Error::InvalidInput("mean of no ratio tables".into()));
        }
        let mut acc = [0.0; NUM_RATIOS];
        for t in tables {
            for (a, v) in acc.iter_mut().zip(t.0) {
                *a += v;
            }
        }
        Ok(RatioTable(acc.map(|a| a / tables.len() as f64)))
    }

    /// `ratio,accuracy` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ratio,accuracy\n");
        for (r, a) in Self::ratios().zip(self.0) {
            out.push_str(&format!("{r:.1},{a}\n"));
        }
        out
    }
}

/// Predictions for one test video at every ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoOutcome {
    pub id: String,
    /// Zero-based true class.
    pub label: usize,
    /// Zero-based sequence prediction at each ratio.
    pub predictions: [usize; NUM_RATIOS],
}

impl VideoOutcome {
    pub fn correct(&self, i: usize) -> bool {
        self.predictions[i - 1] == self.label
    }
}

/// Per-step score matrices of a test set, computed once and reusable for
/// any number of weight vectors.
pub struct ScoredSet<'a> {
    videos: Vec<&'a VideoRecord>,
    matrices: Vec<Vec<ScoreMatrix>>,
}

impl<'a> ScoredSet<'a> {
    pub fn new(models: &ModelSet, videos: &'a [VideoRecord]) -> Result<Self> {
        let refs: Vec<&VideoRecord> = videos.iter().collect();
        Self::from_refs(models, refs)
    }

    pub fn from_refs(models: &ModelSet, videos: Vec<&'a VideoRecord>) -> Result<Self> {
        if videos.is_empty() {
            return Err(Error::InvalidInput("empty test set".into()));
        }
        let matrices = videos
            .par_iter()
            .map(|v| video_score_matrices(models, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoredSet { videos, matrices })
    }

    pub fn outcomes(&self, w: &FusionWeights) -> Result<Vec<VideoOutcome>> {
        self.videos
            .iter()
            .zip(&self.matrices)
            .map(|(v, ms)| {
                let steps = decide(ms, w);
                let mut predictions = [0; NUM_RATIOS];
                for (i, p) in predictions.iter_mut().enumerate() {
                    *p = vote_prefix(&steps, slice_observation(v.len(), i + 1)?)?;
                }
                Ok(VideoOutcome {
                    id: v.id.clone(),
                    label: v.label,
                    predictions,
                })
            })
            .collect()
    }

    pub fn table(&self, w: &FusionWeights) -> Result<RatioTable> {
        Ok(table_of(&self.outcomes(w)?))
    }
}

/// Fraction of correct videos at each ratio.
pub fn table_of(outcomes: &[VideoOutcome]) -> RatioTable {
    let n = outcomes.len() as f64;
    RatioTable(std::array::from_fn(|i| {
        outcomes.iter().filter(|o| o.correct(i + 1)).count() as f64 / n
    }))
}

/// Accuracy of the fused prediction at each observation ratio.
pub fn evaluate(test: &[VideoRecord], models: &ModelSet, w: &FusionWeights) -> Result<RatioTable> {
    ScoredSet::new(models, test)?.table(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldTable {
    pub group: u32,
    pub table: RatioTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LosoResult {
    pub folds: Vec<FoldTable>,
    pub mean: RatioTable,
}

/// Leave-one-group-out cross-validation. For every group, in ascending
/// order, `train_fn` sees only the other groups' videos; the fold's table
/// comes from the held-out group.
pub fn loso_cv<F>(dataset: &[VideoRecord], mut train_fn: F) -> Result<LosoResult>
where
    F: FnMut(&[VideoRecord]) -> Result<(ModelSet, FusionWeights)>,
{
    let groups: BTreeSet<u32> = dataset.iter().map(|v| v.group).collect();
    if groups.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "cross-validation needs at least 2 groups, found {}",
            groups.len()
        )));
    }
    let all_labels: BTreeSet<usize> = dataset.iter().map(|v| v.label).collect();
    let mut folds = Vec::with_capacity(groups.len());
    for &g in &groups {
        let (test, train): (Vec<VideoRecord>, Vec<VideoRecord>) =
            dataset.iter().cloned().partition(|v| v.group == g);
        let train_labels: BTreeSet<usize> = train.iter().map(|v| v.label).collect();
        for missing in all_labels.difference(&train_labels) {
            warn!("group {g} holds every video of class {}", missing + 1);
        }
        let (models, w) = train_fn(&train)?;
        let table = evaluate(&test, &models, &w)?;
        info!("fold {g}: ratio-1.0 accuracy {:.3}", table.at(NUM_RATIOS));
        folds.push(FoldTable { group: g, table });
    }
    let tables: Vec<RatioTable> = folds.iter().map(|f| f.table).collect();
    let mean = RatioTable::mean(&tables)?;
    Ok(LosoResult { folds, mean })
}
