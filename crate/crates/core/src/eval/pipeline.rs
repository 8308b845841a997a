//! Featurization and end-to-end training of the four models and the fusion
//! weights.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::RawVideo;
use crate::context::{
    block_matching_flow, build_context_regions, encode_flow, ContextSequence, FeatureExtractor,
    FeatureVector, FrameImage, VideoRecord,
};
use crate::error::{Error, Result};
use crate::fusion::{build_pairs, nonneg_project_retrain, NonnegFit, RankerConfig};
use crate::models::{
    pad_flow_sequence, train_model, Architecture, Example, ModelKind, ModelSet, SpatialModel,
    StructuralModel, TemporalModel, TrainConfig,
};
use crate::numerics::Rng;
use crate::prediction::{flow_index, video_score_matrices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub block: usize,
    pub search: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            block: 4,
            search: 4,
        }
    }
}

fn context_of(
    image: &FrameImage,
    boxes: &[crate::context::BoundingBox; 2],
    extractor: &dyn FeatureExtractor,
) -> Result<ContextSequence> {
    let regions = build_context_regions(&boxes[0], &boxes[1], image)?;
    ContextSequence::new(
        regions
            .iter()
            .map(|r| extractor.extract(r))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Features of one raw video. Flow image `t` (frames `t` to `t + 1`) is
/// cropped with the boxes of frame `t`; its global-region feature doubles
/// as the temporal model's flow feature.
pub fn featurize_video(
    video: &RawVideo,
    extractor: &dyn FeatureExtractor,
    flow: &FlowConfig,
) -> Result<VideoRecord> {
    let n = video.frames.len();
    if n < 2 || video.boxes.len() != n {
        return Err(Error::InvalidInput(format!(
            "video {:?}: {n} frames and {} box pairs (need equal counts, at least 2)",
            video.id,
            video.boxes.len()
        )));
    }
    let frame_contexts = video
        .frames
        .iter()
        .zip(&video.boxes)
        .map(|(f, b)| context_of(f, b, extractor))
        .collect::<Result<Vec<_>>>()?;
    let mut flow_contexts = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        let field = block_matching_flow(
            &video.frames[t],
            &video.frames[t + 1],
            flow.block,
            flow.search,
        )?;
        let image = encode_flow(&field);
        flow_contexts.push(context_of(image.image(), &video.boxes[t], extractor)?);
    }
    let flow_feats = flow_contexts.iter().map(|c| c.global().clone()).collect();
    Ok(VideoRecord {
        id: video.id.clone(),
        label: video.label,
        group: video.group,
        frame_contexts,
        flow_feats,
        flow_contexts,
    })
}

/// Featurizes videos in parallel; output order follows input order.
pub fn featurize_dataset(
    videos: &[RawVideo],
    extractor: &dyn FeatureExtractor,
    flow: &FlowConfig,
) -> Result<Vec<VideoRecord>> {
    videos
        .par_iter()
        .map(|v| featurize_video(v, extractor, flow))
        .collect()
}

/// Model sizes and optimizer settings shared by the four models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// LSTM hidden units `d`.
    pub lstm_hidden: usize,
    /// Head hidden units of the structural models.
    pub structural_head_hidden: usize,
    /// Head hidden units of the spatial and temporal models.
    pub frame_head_hidden: usize,
    /// Temporal stack length `k`.
    pub stack_len: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    /// Train on every `frame_stride`-th step of each video.
    #[serde(default = "default_stride")]
    pub frame_stride: usize,
}

fn default_clip() -> f64 {
    5.0
}

fn default_stride() -> usize {
    1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lstm_hidden: 512,
            structural_head_hidden: 128,
            frame_head_hidden: 512,
            stack_len: 7,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            clip_norm: 5.0,
            frame_stride: 1,
        }
    }
}

impl ModelConfig {
    /// Architecture of model `kind` under this configuration.
    pub fn architecture(&self, kind: ModelKind, input_dim: usize, classes: usize) -> Architecture {
        let structural = matches!(
            kind,
            ModelKind::SpatialStructural | ModelKind::TemporalStructural
        );
        Architecture {
            kind,
            input_dim,
            classes,
            head_hidden: if structural {
                self.structural_head_hidden
            } else {
                self.frame_head_hidden
            },
            lstm_hidden: structural.then_some(self.lstm_hidden),
            stack_len: (kind == ModelKind::Temporal).then_some(self.stack_len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Share of each class held out from model training to fit the fusion
    /// weights. Zero fits them on the training videos themselves.
    #[serde(default = "default_validation")]
    pub validation_fraction: f64,
}

fn default_c() -> f64 {
    1.0
}

fn default_iterations() -> usize {
    10_000
}

fn default_validation() -> f64 {
    0.25
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            c: default_c(),
            iterations: default_iterations(),
            validation_fraction: default_validation(),
        }
    }
}

impl FusionConfig {
    pub fn ranker(&self) -> RankerConfig {
        RankerConfig {
            c: self.c,
            iterations: self.iterations,
        }
    }
}

/// Output of [`train_system`].
#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub models: ModelSet,
    pub fusion: NonnegFit,
    /// Per-model final training loss, in row order.
    pub final_losses: [f64; 4],
    pub validation_ids: Vec<String>,
}

/// Splits off `fraction` of each class (rounded half up, at least one
/// video when the class has two or more) as validation. Returns
/// `(train, validation)` index lists in dataset order.
pub fn stratified_split(
    videos: &[VideoRecord],
    classes: usize,
    fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "validation fraction {fraction} outside [0, 1)"
        )));
    }
    let mut held = vec![false; videos.len()];
    if fraction > 0.0 {
        for class in 0..classes {
            let mut members: Vec<usize> = (0..videos.len())
                .filter(|&i| videos[i].label == class)
                .collect();
            if members.len() < 2 {
                continue;
            }
            rng.shuffle(&mut members);
            let take = ((members.len() as f64 * fraction + 0.5).floor() as usize)
                .clamp(1, members.len() - 1);
            for &i in &members[..take] {
                held[i] = true;
            }
        }
    }
    let train = (0..videos.len()).filter(|&i| !held[i]).collect();
    let validation = (0..videos.len()).filter(|&i| held[i]).collect();
    Ok((train, validation))
}

fn train_cfg(hp: &ModelConfig, rng: &mut Rng) -> TrainConfig {
    TrainConfig {
        learning_rate: hp.learning_rate,
        epochs: hp.epochs,
        batch_size: hp.batch_size,
        seed: rng.next_u64(),
        clip_norm: hp.clip_norm,
    }
}

/// Trains the four models on `train` and returns them.
pub fn train_models(
    train: &[&VideoRecord],
    classes: usize,
    hp: &ModelConfig,
    seed: u64,
) -> Result<(ModelSet, [f64; 4])> {
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidInput("no training videos".into()))?;
    let dim = first.dim();
    for v in train {
        v.validate(dim).map_err(Error::InvalidInput)?;
    }
    if hp.frame_stride == 0 || hp.stack_len == 0 {
        return Err(Error::InvalidInput(
            "frame stride and stack length must be positive".into(),
        ));
    }
    let mut rng = Rng::new(seed);
    let steps = |v: &VideoRecord| (0..v.len()).step_by(hp.frame_stride);
    let last = |losses: &[f64]| losses.last().copied().unwrap_or(f64::NAN);

    let spatial_ex: Vec<Example<'_, [f64]>> = train
        .iter()
        .flat_map(|v| {
            steps(v).map(|t| Example {
                input: &v.frame_contexts[t].global()[..],
                label: v.label,
            })
        })
        .collect();
    let model = SpatialModel::new(dim, hp.frame_head_hidden, classes, &mut rng);
    let (spatial, rep_s) = train_model(model, &spatial_ex, &train_cfg(hp, &mut rng))?;
    info!(
        "spatial model trained, final loss {:.4}",
        last(&rep_s.loss_trace)
    );

    let stacks: Vec<(Vec<FeatureVector>, usize)> = train
        .iter()
        .flat_map(|v| {
            steps(v).map(|t| {
                let f = flow_index(t, v.len());
                pad_flow_sequence(&v.flow_feats[..=f], hp.stack_len).map(|s| (s, v.label))
            })
        })
        .collect::<Result<_>>()?;
    let temporal_ex: Vec<_> = stacks
        .iter()
        .map(|(s, label)| Example {
            input: &s[..],
            label: *label,
        })
        .collect();
    let model = TemporalModel::new(dim, hp.stack_len, hp.frame_head_hidden, classes, &mut rng);
    let (temporal, rep_t) = train_model(model, &temporal_ex, &train_cfg(hp, &mut rng))?;
    info!(
        "temporal model trained, final loss {:.4}",
        last(&rep_t.loss_trace)
    );

    let frame_ex: Vec<_> = train
        .iter()
        .flat_map(|v| {
            steps(v).map(|t| Example {
                input: &v.frame_contexts[t],
                label: v.label,
            })
        })
        .collect();
    let model = StructuralModel::new(
        ModelKind::SpatialStructural,
        dim,
        hp.lstm_hidden,
        hp.structural_head_hidden,
        classes,
        &mut rng,
    )?;
    let (spatial_structural, rep_ss) = train_model(model, &frame_ex, &train_cfg(hp, &mut rng))?;
    info!(
        "spatial-structural model trained, final loss {:.4}",
        last(&rep_ss.loss_trace)
    );

    let flow_ex: Vec<_> = train
        .iter()
        .flat_map(|v| {
            (0..v.flow_contexts.len())
                .step_by(hp.frame_stride)
                .map(|f| Example {
                    input: &v.flow_contexts[f],
                    label: v.label,
                })
        })
        .collect();
    let model = StructuralModel::new(
        ModelKind::TemporalStructural,
        dim,
        hp.lstm_hidden,
        hp.structural_head_hidden,
        classes,
        &mut rng,
    )?;
    let (temporal_structural, rep_ts) = train_model(model, &flow_ex, &train_cfg(hp, &mut rng))?;
    info!(
        "temporal-structural model trained, final loss {:.4}",
        last(&rep_ts.loss_trace)
    );

    let losses = [
        last(&rep_s.loss_trace),
        last(&rep_t.loss_trace),
        last(&rep_ss.loss_trace),
        last(&rep_ts.loss_trace),
    ];
    Ok((
        ModelSet {
            spatial,
            temporal,
            spatial_structural,
            temporal_structural,
        },
        losses,
    ))
}

/// Learns non-negative fusion weights from every step of `videos`.
pub fn fit_fusion(
    models: &ModelSet,
    videos: &[&VideoRecord],
    cfg: &FusionConfig,
) -> Result<NonnegFit> {
    let per_video = videos
        .par_iter()
        .map(|v| video_score_matrices(models, v))
        .collect::<Result<Vec<_>>>()?;
    let labeled: Vec<_> = per_video
        .into_iter()
        .zip(videos)
        .flat_map(|(ms, v)| ms.into_iter().map(move |s| (s, v.label)))
        .collect();
    let pairs = build_pairs(&labeled)?;
    let fit = nonneg_project_retrain(&pairs, &cfg.ranker())?;
    info!(
        "fusion weights {:?} after {} round(s)",
        fit.weights.values(),
        fit.rounds
    );
    Ok(fit)
}

/// Training and fusion-validation halves of one fold, plus the seed for
/// model initialization and example order. Deterministic in `seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub train: Vec<usize>,
    /// Empty when the weights are fitted on the training videos.
    pub validation: Vec<usize>,
    pub model_seed: u64,
}

impl FoldPlan {
    pub fn new(
        videos: &[VideoRecord],
        classes: usize,
        fusion: &FusionConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = Rng::new(seed);
        let (train, validation) =
            stratified_split(videos, classes, fusion.validation_fraction, &mut rng)?;
        Ok(FoldPlan {
            train,
            validation,
            model_seed: rng.next_u64(),
        })
    }

    pub fn train_videos<'a>(&self, videos: &'a [VideoRecord]) -> Vec<&'a VideoRecord> {
        self.train.iter().map(|&i| &videos[i]).collect()
    }

    /// Videos the fusion weights are fitted on.
    pub fn fusion_videos<'a>(&self, videos: &'a [VideoRecord]) -> Vec<&'a VideoRecord> {
        let idx = if self.validation.is_empty() {
            &self.train
        } else {
            &self.validation
        };
        idx.iter().map(|&i| &videos[i]).collect()
    }
}

/// Full training: validation split, the four models, then the weights.
pub fn train_system(
    videos: &[VideoRecord],
    classes: usize,
    hp: &ModelConfig,
    fusion: &FusionConfig,
    seed: u64,
) -> Result<TrainedSystem> {
    let plan = FoldPlan::new(videos, classes, fusion, seed)?;
    let val = plan.fusion_videos(videos);
    info!(
        "training on {} videos, fitting fusion on {}",
        plan.train.len(),
        val.len()
    );
    let (models, final_losses) =
        train_models(&plan.train_videos(videos), classes, hp, plan.model_seed)?;
    let fit = fit_fusion(&models, &val, fusion)?;
    Ok(TrainedSystem {
        models,
        fusion: fit,
        final_losses,
        validation_ids: plan
            .validation
            .iter()
            .map(|&i| videos[i].id.clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::GridExtractor;
    use crate::eval::synth::{generate_synthetic, SynthConfig};

    fn small_raw() -> Vec<RawVideo> {
        generate_synthetic(&SynthConfig {
            num_classes: 2,
            videos_per_class: 3,
            frames_per_video: 5,
            groups: 3,
            width: 80,
            height: 48,
            seed: 2,
        })
        .unwrap()
    }

    #[test]
    fn featurized_streams_have_consistent_lengths() {
        let ex = GridExtractor::default();
        let recs = featurize_dataset(&small_raw(), &ex, &FlowConfig::default()).unwrap();
        for r in &recs {
            r.validate(ex.dim()).unwrap();
            assert_eq!(r.flow_feats[0], *r.flow_contexts[0].global());
        }
        assert_eq!(recs[4].id, "c2_v001");
    }

    #[test]
    fn split_is_stratified() {
        let ex = GridExtractor::default();
        let recs = featurize_dataset(&small_raw(), &ex, &FlowConfig::default()).unwrap();
        let (train, val) = stratified_split(&recs, 2, 0.25, &mut Rng::new(1)).unwrap();
        assert_eq!(val.len(), 2);
        assert_eq!(train.len() + val.len(), recs.len());
        assert!(val.iter().any(|&i| recs[i].label == 0));
        assert!(val.iter().any(|&i| recs[i].label == 1));
        let (train, val) = stratified_split(&recs, 2, 0.0, &mut Rng::new(1)).unwrap();
        assert!(val.is_empty());
        assert_eq!(train.len(), 6);
    }

    #[test]
    fn tiny_system_trains_deterministically() {
        let ex = GridExtractor::default();
        let recs = featurize_dataset(&small_raw(), &ex, &FlowConfig::default()).unwrap();
        let hp = ModelConfig {
            lstm_hidden: 4,
            structural_head_hidden: 4,
            frame_head_hidden: 4,
            stack_len: 3,
            learning_rate: 0.05,
            epochs: 2,
            batch_size: 4,
            clip_norm: 5.0,
            frame_stride: 2,
        };
        let fusion = FusionConfig {
            iterations: 200,
            ..FusionConfig::default()
        };
        let a = train_system(&recs, 2, &hp, &fusion, 5).unwrap();
        let b = train_system(&recs, 2, &hp, &fusion, 5).unwrap();
        assert_eq!(a.models, b.models);
        assert_eq!(a.fusion, b.fusion);
        assert!(a.fusion.weights.values().iter().all(|&w| w >= 0.0));
        for k in ModelKind::ALL {
            assert_eq!(a.models.architecture(k), hp.architecture(k, ex.dim(), 2));
        }
    }
}
