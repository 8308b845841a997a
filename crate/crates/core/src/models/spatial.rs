use super::head::ClassifierHead;
use super::{
    cross_entropy, Architecture, Classifier, ModelKind, Parameterized, ScoreVector, TensorRef,
};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Single-frame classifier: FC, ReLU, FC, softmax on the feature of the
/// frame region that holds both actors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialModel {
    pub head: ClassifierHead,
}

impl SpatialModel {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Self {
        SpatialModel {
            head: ClassifierHead::random(input_dim, hidden, classes, rng),
        }
    }
}

impl Parameterized for SpatialModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        self.head.tensors().to_vec()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.head.tensors_mut().into_iter().collect()
    }

    fn zeros_like(&self) -> Self {
        SpatialModel {
            head: ClassifierHead::zeros(
                self.head.input_dim(),
                self.head.hidden(),
                self.head.classes(),
            ),
        }
    }
}

impl Classifier for SpatialModel {
    type Input = [f64];

    fn num_classes(&self) -> usize {
        self.head.classes()
    }

    fn forward(&self, feature: &[f64]) -> Result<ScoreVector> {
        self.head.scores(feature)
    }

    fn backward(&self, feature: &[f64], label: usize, grad: &mut Self) -> Result<f64> {
        let cache = self.head.forward_cached(feature)?;
        let (loss, d_probs) = cross_entropy(&cache.probs, label)?;
        self.head
            .backward(feature, &cache, &d_probs, &mut grad.head, None);
        Ok(loss)
    }

    fn architecture(&self) -> Architecture {
        Architecture {
            kind: ModelKind::Spatial,
            input_dim: self.head.input_dim(),
            classes: self.head.classes(),
            head_hidden: self.head.hidden(),
            lstm_hidden: None,
            stack_len: None,
        }
    }

    fn from_architecture(arch: &Architecture) -> Result<Self> {
        if arch.kind != ModelKind::Spatial {
            return Err(Error::Checkpoint(format!(
                "expected spatial model, got {}",
                arch.kind
            )));
        }
        Ok(SpatialModel {
            head: ClassifierHead::zeros(arch.input_dim, arch.head_hidden, arch.classes),
        })
    }
}
