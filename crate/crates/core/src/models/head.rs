use super::{ScoreVector, TensorRef};
use crate::error::{Error, Result};
use crate::numerics::{relu, softmax, Matrix, Rng, Vector};

/// Two-layer classifier: `softmax(W_2 · relu(W_1 · x + b_1) + b_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Matrix,
    pub b2: Vector,
}

/// Intermediate values of one head evaluation, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct HeadCache {
    pre: Vector,
    hidden: Vector,
    pub(crate) probs: Vector,
}

impl ClassifierHead {
    pub fn zeros(input_dim: usize, hidden: usize, classes: usize) -> Self {
        ClassifierHead {
            w1: Matrix::zeros(hidden, input_dim),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(classes, hidden),
            b2: vec![0.0; classes],
        }
    }

    pub fn random(input_dim: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Self {
        ClassifierHead {
            w1: Matrix::random_fan_in(hidden, input_dim, rng),
            b1: vec![0.0; hidden],
            w2: Matrix::random_fan_in(classes, hidden, rng),
            b2: vec![0.0; classes],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn classes(&self) -> usize {
        self.w2.rows()
    }

    pub fn scores(&self, x: &[f64]) -> Result<ScoreVector> {
        Ok(ScoreVector(self.forward_cached(x)?.probs))
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> Result<HeadCache> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(
                "classifier head input",
                self.input_dim(),
                x.len(),
            ));
        }
        let mut pre = self.b1.clone();
        self.w1.matvec_acc(x, &mut pre);
        let hidden: Vector = pre.iter().map(|&v| relu(v)).collect();
        let mut logits = self.b2.clone();
        self.w2.matvec_acc(&hidden, &mut logits);
        let probs = softmax(&logits)?;
        Ok(HeadCache { pre, hidden, probs })
    }

    /// Back-propagates `d_probs` (gradient of the loss with respect to the
    /// head's output probabilities). Parameter gradients are added into
    /// `grad`; the input gradient is added into `d_input` when given.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        cache: &HeadCache,
        d_probs: &[f64],
        grad: &mut ClassifierHead,
        d_input: Option<&mut [f64]>,
    ) {
        let p = &cache.probs;
        let inner: f64 = p.iter().zip(d_probs).map(|(a, b)| a * b).sum();
        let d_logits: Vector = p
            .iter()
            .zip(d_probs)
            .map(|(pi, di)| pi * (di - inner))
            .collect();
        grad.w2.add_outer(&d_logits, &cache.hidden);
        add_into(&mut grad.b2, &d_logits);

        let mut d_hidden = vec![0.0; self.hidden()];
        self.w2.matvec_t_acc(&d_logits, &mut d_hidden);
        for (d, &a) in d_hidden.iter_mut().zip(&cache.pre) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        grad.w1.add_outer(&d_hidden, x);
        add_into(&mut grad.b1, &d_hidden);
        if let Some(d_input) = d_input {
            self.w1.matvec_t_acc(&d_hidden, d_input);
        }
    }

    pub(crate) fn tensors(&self) -> [TensorRef<'_>; 4] {
        [
            TensorRef::matrix("W_1", &self.w1),
            TensorRef::vector("b_1", &self.b1),
            TensorRef::matrix("W_2", &self.w2),
            TensorRef::vector("b_2", &self.b2),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.data_mut(),
            &mut self.b1,
            self.w2.data_mut(),
            &mut self.b2,
        ]
    }
}

pub(crate) fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
