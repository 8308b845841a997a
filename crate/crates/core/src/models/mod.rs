//! The four classifier families and their training loop.
//!
//! Every model emits a probability vector over the `m` interaction classes
//! and implements [`Classifier`], which couples the forward pass with a
//! hand-written backward pass for the cross-entropy loss.

mod checkpoint;
mod head;
mod lstm;
mod spatial;
mod structural;
mod temporal;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Architecture, Checkpoint, TensorRecord};
pub use head::ClassifierHead;
pub use lstm::{lstm_step, LstmParams, LstmState};
pub use spatial::SpatialModel;
pub use structural::StructuralModel;
pub use temporal::{pad_flow_sequence, TemporalConvParams, TemporalModel};
pub use train::{train_model, Example, TrainConfig, TrainReport};

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Class probabilities emitted by one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    /// Wraps a probability vector: non-negative entries summing to one
    /// within 1e-6.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty score vector".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::NonFinite(format!("score vector {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "score vector sums to {total}, expected 1"
            )));
        }
        Ok(ScoreVector(probs))
    }

    pub fn uniform(m: usize) -> Self {
        ScoreVector(vec![1.0 / m as f64; m])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The four models, in score-matrix row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Spatial,
    Temporal,
    SpatialStructural,
    TemporalStructural,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Spatial,
        ModelKind::Temporal,
        ModelKind::SpatialStructural,
        ModelKind::TemporalStructural,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Spatial => "spatial",
            ModelKind::Temporal => "temporal",
            ModelKind::SpatialStructural => "spatial_structural",
            ModelKind::TemporalStructural => "temporal_structural",
        }
    }

    pub fn row(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Borrowed view of one named parameter tensor.
#[derive(Debug, Clone, Copy)]
pub struct TensorRef<'a> {
    pub name: &'static str,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub(crate) fn matrix(name: &'static str, m: &'a Matrix) -> Self {
        TensorRef {
            name,
            shape: (m.rows(), m.cols()),
            data: m.data(),
        }
    }

    pub(crate) fn vector(name: &'static str, v: &'a [f64]) -> Self {
        TensorRef {
            name,
            shape: (v.len(), 1),
            data: v,
        }
    }
}

/// Access to a model's parameters as an ordered list of named tensors.
/// `tensors` and `tensors_mut` must list tensors in the same order.
pub trait Parameterized {
    fn tensors(&self) -> Vec<TensorRef<'_>>;

    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    /// Same architecture, every parameter zero.
    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }

    fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "flat parameter length");
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
    }

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s.data) {
                *d += scale * v;
            }
        }
    }

    fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum()
    }
}

/// A probabilistic classifier trained with cross-entropy.
pub trait Classifier: Parameterized + Clone + Send + Sync {
    type Input: ?Sized + Sync;

    fn num_classes(&self) -> usize;

    fn forward(&self, input: &Self::Input) -> Result<ScoreVector>;

    /// Returns `-ln p[label]` for the emitted scores `p` and adds its
    /// gradient with respect to every parameter into `grad`.
    fn backward(&self, input: &Self::Input, label: usize, grad: &mut Self) -> Result<f64>;

    fn architecture(&self) -> Architecture;

    /// Zero-initialized model of the given architecture.
    fn from_architecture(arch: &Architecture) -> Result<Self>;
}

/// The four trained models of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub spatial: SpatialModel,
    pub temporal: TemporalModel,
    pub spatial_structural: StructuralModel,
    pub temporal_structural: StructuralModel,
}

impl ModelSet {
    pub fn num_classes(&self) -> usize {
        self.spatial.num_classes()
    }

    pub fn stack_len(&self) -> usize {
        self.temporal.stack_len()
    }

    pub fn architecture(&self, kind: ModelKind) -> Architecture {
        match kind {
            ModelKind::Spatial => self.spatial.architecture(),
            ModelKind::Temporal => self.temporal.architecture(),
            ModelKind::SpatialStructural => self.spatial_structural.architecture(),
            ModelKind::TemporalStructural => self.temporal_structural.architecture(),
        }
    }
}

/// Cross-entropy of `probs` against `label`, and the gradient of that loss
/// with respect to `probs`.
pub(crate) fn cross_entropy(probs: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= probs.len() {
        return Err(Error::InvalidInput(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let p = probs[label].max(f64::MIN_POSITIVE);
    let mut d = vec![0.0; probs.len()];
    d[label] = -1.0 / p;
    Ok((-p.ln(), d))
}
