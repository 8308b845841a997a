use super::head::ClassifierHead;
use super::lstm::LstmParams;
use super::{
    cross_entropy, Architecture, Classifier, ModelKind, Parameterized, ScoreVector, TensorRef,
};
use crate::context::ContextSequence;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Vector};

/// LSTM over the seven-step context sequence. Every step's output gate
/// feeds the shared head; the per-step class scores are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    kind: ModelKind,
    pub lstm: LstmParams,
    pub head: ClassifierHead,
}

impl StructuralModel {
    pub fn new(
        kind: ModelKind,
        input_dim: usize,
        lstm_hidden: usize,
        head_hidden: usize,
        classes: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_kind(kind)?;
        let lstm = LstmParams::random(input_dim, lstm_hidden, rng);
        let head = ClassifierHead::random(lstm_hidden, head_hidden, classes, rng);
        Ok(StructuralModel { kind, lstm, head })
    }

    pub fn from_parts(kind: ModelKind, lstm: LstmParams, head: ClassifierHead) -> Result<Self> {
        check_kind(kind)?;
        if head.input_dim() != lstm.hidden() {
            return Err(Error::shape(
                "structural head input",
                lstm.hidden(),
                head.input_dim(),
            ));
        }
        Ok(StructuralModel { kind, lstm, head })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Class scores of every step before averaging.
    pub fn step_scores(&self, seq: &ContextSequence) -> Result<Vec<ScoreVector>> {
        let steps = self.steps(seq)?;
        self.lstm
            .run(&steps)?
            .iter()
            .map(|c| self.head.scores(&c.output))
            .collect()
    }

    fn steps<'a>(&self, seq: &'a ContextSequence) -> Result<Vec<&'a [f64]>> {
        if seq.dim() != self.lstm.input_dim() {
            return Err(Error::shape(
                "context feature dimension",
                self.lstm.input_dim(),
                seq.dim(),
            ));
        }
        Ok(seq.steps().iter().map(|f| &f[..]).collect())
    }
}

fn check_kind(kind: ModelKind) -> Result<()> {
    match kind {
        ModelKind::SpatialStructural | ModelKind::TemporalStructural => Ok(()),
        other => Err(Error::InvalidInput(format!(
            "{other} is not a structural model"
        ))),
    }
}

fn average(rows: &[Vector], m: usize) -> Vector {
    let mut mean = vec![0.0; m];
    for r in rows {
        for (a, v) in mean.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

impl Parameterized for StructuralModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut t = self.lstm.tensors().to_vec();
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = self.lstm.tensors_mut().into_iter().collect();
        t.extend(self.head.tensors_mut());
        t
    }

    fn zeros_like(&self) -> Self {
        StructuralModel {
            kind: self.kind,
            lstm: LstmParams::zeros(self.lstm.input_dim(), self.lstm.hidden()),
            head: ClassifierHead::zeros(
                self.head.input_dim(),
                self.head.hidden(),
                self.head.classes(),
            ),
        }
    }
}

impl Classifier for StructuralModel {
    type Input = ContextSequence;

    fn num_classes(&self) -> usize {
        self.head.classes()
    }

    fn forward(&self, seq: &ContextSequence) -> Result<ScoreVector> {
        let rows: Vec<Vector> = self
            .step_scores(seq)?
            .into_iter()
            .map(ScoreVector::into_inner)
            .collect();
        Ok(ScoreVector(average(&rows, self.num_classes())))
    }

    /// Loss is the cross-entropy of the step-averaged scores.
    fn backward(&self, seq: &ContextSequence, label: usize, grad: &mut Self) -> Result<f64> {
        let steps = self.steps(seq)?;
        let caches = self.lstm.run(&steps)?;
        let heads = caches
            .iter()
            .map(|c| self.head.forward_cached(&c.output))
            .collect::<Result<Vec<_>>>()?;
        let probs: Vec<Vector> = heads.iter().map(|h| h.probs.clone()).collect();
        let mean = average(&probs, self.num_classes());
        let (loss, d_mean) = cross_entropy(&mean, label)?;
        let n = steps.len() as f64;
        let d_step: Vector = d_mean.iter().map(|v| v / n).collect();

        let mut d_outputs = Vec::with_capacity(caches.len());
        for (c, h) in caches.iter().zip(&heads) {
            let mut d_o = vec![0.0; self.lstm.hidden()];
            self.head
                .backward(&c.output, h, &d_step, &mut grad.head, Some(&mut d_o));
            d_outputs.push(d_o);
        }
        self.lstm
            .backward(&steps, &caches, &d_outputs, &mut grad.lstm);
        Ok(loss)
    }

    fn architecture(&self) -> Architecture {
        Architecture {
            kind: self.kind,
            input_dim: self.lstm.input_dim(),
            classes: self.head.classes(),
            head_hidden: self.head.hidden(),
            lstm_hidden: Some(self.lstm.hidden()),
            stack_len: None,
        }
    }

    fn from_architecture(arch: &Architecture) -> Result<Self> {
        let d = arch.lstm_hidden.ok_or_else(|| {
            Error::Checkpoint(format!("{} architecture lacks lstm_hidden", arch.kind))
        })?;
        check_kind(arch.kind).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(StructuralModel {
            kind: arch.kind,
            lstm: LstmParams::zeros(arch.input_dim, d),
            head: ClassifierHead::zeros(d, arch.head_hidden, arch.classes),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::FeatureVector;
    use crate::numerics::grad_check;

    fn random_seq(rng: &mut Rng, dim: usize) -> ContextSequence {
        let regions = (0..7)
            .map(|_| {
                FeatureVector::new((0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
            })
            .collect();
        ContextSequence::new(regions).unwrap()
    }

    fn model(seed: u64, dim: usize, d: usize, d1: usize, m: usize) -> StructuralModel {
        StructuralModel::new(
            ModelKind::SpatialStructural,
            dim,
            d,
            d1,
            m,
            &mut Rng::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn input_ignoring_head_gives_uniform() {
        let mut mdl = model(1, 3, 4, 5, 3);
        mdl.head = ClassifierHead::zeros(4, 5, 3);
        let s = mdl.forward(&random_seq(&mut Rng::new(2), 3)).unwrap();
        for v in s.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_of_step_scores() {
        let mdl = model(3, 3, 4, 5, 4);
        let seq = random_seq(&mut Rng::new(4), 3);
        let steps = mdl.step_scores(&seq).unwrap();
        assert_eq!(steps.len(), 7);
        let got = mdl.forward(&seq).unwrap();
        for c in 0..4 {
            let mean: f64 = steps.iter().map(|s| s[c]).sum::<f64>() / 7.0;
            assert!((got[c] - mean).abs() < 1e-15);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_lstm_hidden_state_stays_zero() {
        let mdl = StructuralModel::from_architecture(&model(5, 3, 4, 2, 2).architecture()).unwrap();
        let seq = random_seq(&mut Rng::new(6), 3);
        let steps: Vec<&[f64]> = seq.steps().iter().map(|f| &f[..]).collect();
        for c in mdl.lstm.run(&steps).unwrap() {
            assert!(c.state().hidden.iter().all(|&h| h == 0.0));
        }
    }

    #[test]
    fn rejects_wrong_dimension_and_kind() {
        let mdl = model(7, 3, 4, 2, 2);
        assert!(mdl.forward(&random_seq(&mut Rng::new(1), 5)).is_err());
        assert!(StructuralModel::new(ModelKind::Spatial, 3, 4, 2, 2, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn bptt_gradient_matches_central_differences() {
        let mut rng = Rng::new(7);
        let mdl =
            StructuralModel::new(ModelKind::TemporalStructural, 3, 4, 5, 3, &mut rng).unwrap();
        let seq = random_seq(&mut rng, 3);
        let mut grad = mdl.zeros_like();
        mdl.backward(&seq, 1, &mut grad).unwrap();
        let mut probe = mdl.clone();
        let mut theta = mdl.flat();
        let err = grad_check(
            |v| {
                probe.set_flat(v);
                -probe.forward(&seq).unwrap()[1].ln()
            },
            &mut theta,
            &grad.flat(),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
