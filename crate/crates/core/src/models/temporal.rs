use super::head::ClassifierHead;
use super::{
    cross_entropy, Architecture, Classifier, ModelKind, Parameterized, ScoreVector, TensorRef,
};
use crate::context::FeatureVector;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Vector};

/// Depthwise temporal convolution with one output step: channel `c` of the
/// collapsed vector is `Σ_τ kernel[c][τ] · flows[τ][c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConvParams {
    /// `dim × k`
    pub kernel: Matrix,
}

impl TemporalConvParams {
    /// Every channel starts as the temporal mean.
    pub fn mean(dim: usize, k: usize) -> Self {
        let mut kernel = Matrix::zeros(dim, k);
        kernel
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 1.0 / k as f64);
        TemporalConvParams { kernel }
    }

    pub fn stack_len(&self) -> usize {
        self.kernel.cols()
    }

    pub fn dim(&self) -> usize {
        self.kernel.rows()
    }

    pub fn collapse(&self, flows: &[FeatureVector]) -> Result<Vector> {
        let k = self.stack_len();
        if flows.len() != k {
            return Err(Error::shape("temporal stack length", k, flows.len()));
        }
        if let Some(f) = flows.iter().find(|f| f.dim() != self.dim()) {
            return Err(Error::shape(
                "temporal feature dimension",
                self.dim(),
                f.dim(),
            ));
        }
        Ok((0..self.dim())
            .map(|c| {
                self.kernel
                    .row(c)
                    .iter()
                    .zip(flows)
                    .map(|(w, f)| w * f[c])
                    .sum()
            })
            .collect())
    }
}

/// Flow-stack classifier: temporal convolution, then FC, ReLU, FC, softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalModel {
    pub conv: TemporalConvParams,
    pub head: ClassifierHead,
}

impl TemporalModel {
    pub fn new(input_dim: usize, k: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Self {
        TemporalModel {
            conv: TemporalConvParams::mean(input_dim, k),
            head: ClassifierHead::random(input_dim, hidden, classes, rng),
        }
    }

    pub fn stack_len(&self) -> usize {
        self.conv.stack_len()
    }
}

impl Parameterized for TemporalModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut t = vec![TensorRef::matrix("kernel", &self.conv.kernel)];
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = vec![self.conv.kernel.data_mut()];
        t.extend(self.head.tensors_mut());
        t
    }

    fn zeros_like(&self) -> Self {
        TemporalModel {
            conv: TemporalConvParams {
                kernel: Matrix::zeros(self.conv.dim(), self.stack_len()),
            },
            head: ClassifierHead::zeros(
                self.head.input_dim(),
                self.head.hidden(),
                self.head.classes(),
            ),
        }
    }
}

impl Classifier for TemporalModel {
    type Input = [FeatureVector];

    fn num_classes(&self) -> usize {
        self.head.classes()
    }

    fn forward(&self, flows: &[FeatureVector]) -> Result<ScoreVector> {
        self.head.scores(&self.conv.collapse(flows)?)
    }

    fn backward(&self, flows: &[FeatureVector], label: usize, grad: &mut Self) -> Result<f64> {
        let collapsed = self.conv.collapse(flows)?;
        let cache = self.head.forward_cached(&collapsed)?;
        let (loss, d_probs) = cross_entropy(&cache.probs, label)?;
        let mut d_collapsed = vec![0.0; collapsed.len()];
        self.head.backward(
            &collapsed,
            &cache,
            &d_probs,
            &mut grad.head,
            Some(&mut d_collapsed),
        );
        let k = self.stack_len();
        let gk = grad.conv.kernel.data_mut();
        for (c, &dv) in d_collapsed.iter().enumerate() {
            for (tau, f) in flows.iter().enumerate() {
                gk[c * k + tau] += dv * f[c];
            }
        }
        Ok(loss)
    }

    fn architecture(&self) -> Architecture {
        Architecture {
            kind: ModelKind::Temporal,
            input_dim: self.conv.dim(),
            classes: self.head.classes(),
            head_hidden: self.head.hidden(),
            lstm_hidden: None,
            stack_len: Some(self.stack_len()),
        }
    }

    fn from_architecture(arch: &Architecture) -> Result<Self> {
        let k = match (arch.kind, arch.stack_len) {
            (ModelKind::Temporal, Some(k)) if k > 0 => k,
            _ => {
                return Err(Error::Checkpoint(format!(
                    "expected temporal model with a stack length, got {} / {:?}",
                    arch.kind, arch.stack_len
                )))
            }
        };
        Ok(TemporalModel {
            conv: TemporalConvParams {
                kernel: Matrix::zeros(arch.input_dim, k),
            },
            head: ClassifierHead::zeros(arch.input_dim, arch.head_hidden, arch.classes),
        })
    }
}

/// Builds the length-`k` flow stack for the current step from the `t`
/// flows observed so far: the last `k` flows once `t >= k`, otherwise all
/// `t` flows followed by the current (t-th) flow repeated `k - t` times.
pub fn pad_flow_sequence<T: Clone>(flows_so_far: &[T], k: usize) -> Result<Vec<T>> {
    let t = flows_so_far.len();
    let current = flows_so_far
        .last()
        .ok_or_else(|| Error::InvalidInput("no flow observed yet".into()))?;
    if k == 0 {
        return Err(Error::InvalidInput("stack length must be positive".into()));
    }
    if t >= k {
        return Ok(flows_so_far[t - k..].to_vec());
    }
    let mut out = flows_so_far.to_vec();
    out.resize(k, current.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: Vec<f64>) -> FeatureVector {
        FeatureVector::new(v).unwrap()
    }

    fn random_flows(rng: &mut Rng, k: usize, dim: usize) -> Vec<FeatureVector> {
        (0..k)
            .map(|_| fv((0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()))
            .collect()
    }

    #[test]
    fn delta_kernel_selects_first_flow() {
        let mut rng = Rng::new(1);
        let flows = random_flows(&mut rng, 7, 5);
        let mut conv = TemporalConvParams {
            kernel: Matrix::zeros(5, 7),
        };
        for c in 0..5 {
            conv.kernel.set(c, 0, 1.0);
        }
        assert_eq!(conv.collapse(&flows).unwrap(), flows[0].to_vec());
    }

    #[test]
    fn mean_kernel_gives_temporal_mean() {
        let mut rng = Rng::new(2);
        let flows = random_flows(&mut rng, 7, 4);
        let got = TemporalConvParams::mean(4, 7).collapse(&flows).unwrap();
        for c in 0..4 {
            let mean = flows.iter().map(|f| f[c]).sum::<f64>() / 7.0;
            assert!((got[c] - mean).abs() < 1e-14);
        }
    }

    #[test]
    fn random_kernel_matches_weighted_sum() {
        let mut rng = Rng::new(3);
        let (k, dim) = (7, 6);
        let flows = random_flows(&mut rng, k, dim);
        let kernel = Matrix::random_fan_in(dim, k, &mut rng);
        let conv = TemporalConvParams {
            kernel: kernel.clone(),
        };
        let got = conv.collapse(&flows).unwrap();
        for c in 0..dim {
            let mut acc = 0.0;
            for tau in 0..k {
                acc += kernel.get(c, tau) * flows[tau][c];
            }
            assert!((got[c] - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_stack_length_rejected() {
        let mut rng = Rng::new(4);
        let model = TemporalModel::new(3, 7, 4, 2, &mut rng);
        assert!(model.forward(&random_flows(&mut rng, 6, 3)).is_err());
        assert!(model.forward(&random_flows(&mut rng, 7, 4)).is_err());
        let s = model.forward(&random_flows(&mut rng, 7, 3)).unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn padding_examples() {
        assert_eq!(
            pad_flow_sequence(&[1, 2, 3], 7).unwrap(),
            vec![1, 2, 3, 3, 3, 3, 3]
        );
        let seven: Vec<i32> = (1..=7).collect();
        assert_eq!(pad_flow_sequence(&seven, 7).unwrap(), seven);
        let ten: Vec<i32> = (1..=10).collect();
        assert_eq!(
            pad_flow_sequence(&ten, 7).unwrap(),
            (4..=10).collect::<Vec<_>>()
        );
        assert!(pad_flow_sequence::<i32>(&[], 7).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(5);
        let mut model = TemporalModel::new(4, 3, 5, 3, &mut rng);
        model.conv.kernel = Matrix::random_fan_in(4, 3, &mut rng);
        let flows = random_flows(&mut rng, 3, 4);
        let mut grad = model.zeros_like();
        model.backward(&flows, 1, &mut grad).unwrap();
        let mut probe = model.clone();
        let mut theta = model.flat();
        let err = crate::numerics::grad_check(
            |v| {
                probe.set_flat(v);
                -probe.forward(&flows).unwrap()[1].ln()
            },
            &mut theta,
            &grad.flat(),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
