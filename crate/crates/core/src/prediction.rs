//! Per-timestep fused classification and the sequence-level majority vote.
//!
//! At step `t` (zero-based) of a video with `n` frames, the spatial and
//! spatial-structural models see frame `t`; the temporal-structural model
//! sees flow image `min(t, n - 2)` (the flow from frame `t` to `t + 1`, the
//! last step reusing the final flow); the temporal model sees the padded
//! stack of flow features up to that same flow.

use serde::Serialize;

use crate::context::VideoRecord;
use crate::error::{Error, Result};
use crate::fusion::{fuse_scores, FusionWeights, ScoreMatrix};
use crate::models::{pad_flow_sequence, Classifier, ModelKind, ModelSet};
use crate::numerics::argmax;

/// Fused decision at one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimestepDecision {
    /// Zero-based step index.
    pub t: usize,
    pub c_t: Vec<f64>,
    /// Zero-based predicted class.
    pub p_t: usize,
}

/// Counts of per-step labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteHistogram {
    counts: Vec<usize>,
}

impl VoteHistogram {
    /// Histogram over `max(labels) + 1` classes.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let top = labels
            .iter()
            .max()
            .ok_or_else(|| Error::InvalidInput("majority vote over no labels".into()))?;
        let mut counts = vec![0; top + 1];
        for &l in labels {
            counts[l] += 1;
        }
        Ok(VoteHistogram { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Most frequent class, the smallest index among equals.
    pub fn winner(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }
}

/// Index of the largest combined score, the smallest index among equals.
/// `c_t` must be non-empty.
pub fn per_step_label(c_t: &[f64]) -> usize {
    argmax(c_t)
}

pub fn majority_vote(labels: &[usize]) -> Result<usize> {
    Ok(VoteHistogram::from_labels(labels)?.winner())
}

/// Flow index used at step `t` of an `n`-frame video.
pub fn flow_index(t: usize, n: usize) -> usize {
    t.min(n.saturating_sub(2))
}

/// Score matrix of the four models at step `t`.
pub fn score_matrix_at(models: &ModelSet, video: &VideoRecord, t: usize) -> Result<ScoreMatrix> {
    let n = video.len();
    if t >= n {
        return Err(Error::InvalidInput(format!(
            "step {t} beyond video {:?} of {n} frames",
            video.id
        )));
    }
    let f = flow_index(t, n);
    let frame = video
        .frame_contexts
        .get(t)
        .ok_or_else(|| Error::Missing(format!("frame {t} of video {:?}", video.id)))?;
    let flow_ctx = video
        .flow_contexts
        .get(f)
        .ok_or_else(|| Error::Missing(format!("flow context {f} of video {:?}", video.id)))?;
    if video.flow_feats.len() <= f {
        return Err(Error::Missing(format!(
            "flow feature {f} of video {:?}",
            video.id
        )));
    }
    let stack = pad_flow_sequence(&video.flow_feats[..=f], models.stack_len())?;
    ScoreMatrix::from_scores([
        models.spatial.forward(frame.global())?,
        models.temporal.forward(&stack)?,
        models.spatial_structural.forward(frame)?,
        models.temporal_structural.forward(flow_ctx)?,
    ])
}

/// Score matrices of every step of a video.
pub fn video_score_matrices(models: &ModelSet, video: &VideoRecord) -> Result<Vec<ScoreMatrix>> {
    check_video(models, video)?;
    (0..video.len())
        .map(|t| score_matrix_at(models, video, t))
        .collect()
}

fn check_video(models: &ModelSet, video: &VideoRecord) -> Result<()> {
    let dim = models.architecture(ModelKind::Spatial).input_dim;
    video.validate(dim).map_err(Error::Missing)
}

/// Fuses and labels each matrix in order.
pub fn decide(matrices: &[ScoreMatrix], w: &FusionWeights) -> Vec<TimestepDecision> {
    matrices
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let c_t = fuse_scores(s, w);
            let p_t = per_step_label(&c_t);
            TimestepDecision { t, c_t, p_t }
        })
        .collect()
}

/// Majority vote over the first `upto` decisions.
pub fn vote_prefix(decisions: &[TimestepDecision], upto: usize) -> Result<usize> {
    let labels: Vec<usize> = decisions.iter().take(upto).map(|d| d.p_t).collect();
    majority_vote(&labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequencePrediction {
    /// Zero-based sequence label.
    pub p_star: usize,
    pub steps: Vec<TimestepDecision>,
}

/// Predicts a video from its first `upto` frames.
pub fn predict_sequence(
    models: &ModelSet,
    w: &FusionWeights,
    video: &VideoRecord,
    upto: usize,
) -> Result<SequencePrediction> {
    check_video(models, video)?;
    if upto == 0 || upto > video.len() {
        return Err(Error::InvalidInput(format!(
            "observed length {upto} outside 1..={} for video {:?}",
            video.len(),
            video.id
        )));
    }
    let matrices = (0..upto)
        .map(|t| score_matrix_at(models, video, t))
        .collect::<Result<Vec<_>>>()?;
    let steps = decide(&matrices, w);
    let p_star = vote_prefix(&steps, upto)?;
    Ok(SequencePrediction { p_star, steps })
}
