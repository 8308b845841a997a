use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Examples per gradient work unit. Fixed so the reduction order, and hence
/// every trained bit, does not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
}

fn default_clip_norm() -> f64 {
    5.0
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput(
                "epochs and batch size must be positive".into(),
            ));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidInput(format!("clip norm {}", self.clip_norm)));
        }
        Ok(())
    }
}

/// One labeled training input (label is zero-based).
pub struct Example<'a, I: ?Sized> {
    pub input: &'a I,
    pub label: usize,
}

impl<I: ?Sized> Clone for Example<'_, I> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<I: ?Sized> Copy for Example<'_, I> {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean cross-entropy of each epoch, accumulated over its batches.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch gradient descent on mean cross-entropy with global-norm
/// gradient clipping. Deterministic given `cfg.seed` (example order).
pub fn train_model<M: Classifier>(
    mut model: M,
    examples: &[Example<'_, M::Input>],
    cfg: &TrainConfig,
) -> Result<(M, TrainReport)> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidInput("no training examples".into()));
    }
    let m = model.num_classes();
    let mut seen = vec![false; m];
    for ex in examples {
        if ex.label >= m {
            return Err(Error::InvalidInput(format!(
                "label {} out of range for {m} classes",
                ex.label
            )));
        }
        seen[ex.label] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        log::warn!("class {} has no training examples", missing + 1);
    }

    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, mut grad) = batch_gradient(&model, examples, batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss {loss} at epoch {epoch}, batch {b}"
                )));
            }
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            let norm = grad.squared_norm().sqrt() * scale;
            let clip = if norm > cfg.clip_norm {
                cfg.clip_norm / norm
            } else {
                1.0
            };
            grad.tensors_mut()
                .into_iter()
                .flat_map(|t| t.iter_mut())
                .for_each(|v| *v *= scale * clip);
            model.add_scaled(&grad, -cfg.learning_rate);
        }
        let mean = total / examples.len() as f64;
        debug!("epoch {epoch}: mean loss {mean:.6}");
        loss_trace.push(mean);
    }
    Ok((model, TrainReport { loss_trace }))
}

fn batch_gradient<M: Classifier>(
    model: &M,
    examples: &[Example<'_, M::Input>],
    batch: &[usize],
) -> Result<(f64, M)> {
    let parts = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grad = model.zeros_like();
            let mut loss = 0.0;
            for &i in chunk {
                let ex = examples[i];
                loss += model.backward(ex.input, ex.label, &mut grad)?;
            }
            Ok((loss, grad))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grad) = iter.next().expect("batch is non-empty");
    for (l, g) in iter {
        loss += l;
        grad.add_scaled(&g, 1.0);
    }
    Ok((loss, grad))
}
