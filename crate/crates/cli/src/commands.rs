use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ipred_core::context::{load_feature_file, write_feature_file, VideoRecord};
use ipred_core::eval::{
    featurize_dataset, fit_fusion, slice_observation, table_of, train_models, FoldPlan, RatioTable,
    ScoredSet, VideoOutcome, NUM_RATIOS,
};
use ipred_core::fusion::{FusionWeights, WeightsFile};
use ipred_core::models::{
    load_checkpoint, save_checkpoint, Checkpoint, Classifier, ModelKind, ModelSet,
};
use ipred_core::numerics::Rng;
use ipred_core::prediction::{predict_sequence, TimestepDecision};
use log::{info, warn};
use serde::Serialize;

use crate::config::{Config, DatasetConfig, EvalMode, Fold};
use crate::error::{io_err, CliError, CliResult};
use crate::frames::{read_dataset, write_dataset};

/// Loaded configuration plus the output root.
pub struct Context {
    pub cfg: Config,
    pub hash: String,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cfg: Config, out: PathBuf) -> Self {
        let hash = cfg.hash();
        Context { cfg, hash, out }
    }

    fn dataset_dir(&self) -> PathBuf {
        match &self.cfg.dataset {
            DatasetConfig::Frames { path } => path.clone(),
            _ => self.out.join("dataset"),
        }
    }

    fn features_path(&self) -> PathBuf {
        match &self.cfg.dataset {
            DatasetConfig::Features { path, .. } => path.clone(),
            _ => self.out.join("features.jsonl"),
        }
    }

    fn fold_dir(&self, fold: &Fold) -> PathBuf {
        self.out.join("folds").join(&fold.name)
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn synth(ctx: &Context) -> CliResult<()> {
    let cfg = ctx
        .cfg
        .synth()
        .ok_or_else(|| CliError::Config("synth needs a synthetic dataset source".into()))?;
    let videos = ipred_core::eval::generate_synthetic(&cfg)?;
    let dir = ctx.dataset_dir();
    create_dir(&dir)?;
    write_dataset(&dir, &videos, cfg.num_classes)?;
    info!("wrote {} videos to {}", videos.len(), dir.display());
    Ok(())
}

pub fn featurize(ctx: &Context) -> CliResult<()> {
    if let DatasetConfig::Features { .. } = ctx.cfg.dataset {
        return Err(CliError::Config("dataset is already a feature file".into()));
    }
    let (raw, _) = read_dataset(&ctx.dataset_dir())?;
    let records = featurize_dataset(&raw, &ctx.cfg.extractor, &ctx.cfg.flow)?;
    create_dir(&ctx.out)?;
    let path = ctx.features_path();
    write_feature_file(&path, &records)?;
    info!(
        "wrote features of {} videos to {}",
        records.len(),
        path.display()
    );
    Ok(())
}

/// Feature records and the class count.
fn load_features(ctx: &Context) -> CliResult<(Vec<VideoRecord>, usize)> {
    let videos = load_feature_file(&ctx.features_path())?;
    if videos.is_empty() {
        return Err(CliError::Config("feature file holds no videos".into()));
    }
    let dim = ctx.cfg.feature_dim();
    for v in &videos {
        v.validate(dim).map_err(ipred_core::Error::InvalidInput)?;
    }
    let classes = match &ctx.cfg.dataset {
        DatasetConfig::Synthetic { num_classes, .. } => *num_classes,
        DatasetConfig::Frames { path } => {
            let meta: crate::frames::DatasetMeta = serde_json::from_str(
                &fs::read_to_string(path.join("meta.json")).map_err(|e| io_err(path, e))?,
            )?;
            meta.num_classes
        }
        DatasetConfig::Features { num_classes, .. } => {
            num_classes.unwrap_or_else(|| videos.iter().map(|v| v.label + 1).max().unwrap_or(1))
        }
    };
    if let Some(v) = videos.iter().find(|v| v.label >= classes) {
        return Err(CliError::Config(format!(
            "video {:?} has label {} but only {classes} classes are configured",
            v.id,
            v.label + 1
        )));
    }
    Ok((videos, classes))
}

/// Folds, their training videos and per-fold seeds.
fn fold_plans(
    ctx: &Context,
    videos: &[VideoRecord],
    classes: usize,
) -> CliResult<Vec<(Fold, Vec<VideoRecord>, FoldPlan)>> {
    let mut seeds = Rng::new(ctx.cfg.seed);
    ctx.cfg
        .folds(videos)?
        .into_iter()
        .map(|fold| {
            let train: Vec<VideoRecord> = videos
                .iter()
                .filter(|v| !fold.is_test(v))
                .cloned()
                .collect();
            let plan = FoldPlan::new(&train, classes, &ctx.cfg.fusion, seeds.next_u64())?;
            Ok((fold, train, plan))
        })
        .collect()
}

pub fn train(ctx: &Context) -> CliResult<()> {
    let (videos, classes) = load_features(ctx)?;
    for (fold, train, plan) in fold_plans(ctx, &videos, classes)? {
        info!(
            "fold {}: training on {} videos",
            fold.name,
            plan.train.len()
        );
        let (models, _) = train_models(
            &plan.train_videos(&train),
            classes,
            &ctx.cfg.model,
            plan.model_seed,
        )?;
        let dir = ctx.fold_dir(&fold);
        create_dir(&dir)?;
        let checkpoints = [
            Checkpoint::from_model(&models.spatial, &ctx.hash),
            Checkpoint::from_model(&models.temporal, &ctx.hash),
            Checkpoint::from_model(&models.spatial_structural, &ctx.hash),
            Checkpoint::from_model(&models.temporal_structural, &ctx.hash),
        ];
        for (kind, ck) in ModelKind::ALL.iter().zip(&checkpoints) {
            save_checkpoint(&dir.join(format!("{}.json", kind.name())), ck)?;
        }
    }
    Ok(())
}

fn load_model<M: Classifier>(
    ctx: &Context,
    dir: &Path,
    kind: ModelKind,
    classes: usize,
) -> CliResult<M> {
    let path = dir.join(format!("{}.json", kind.name()));
    if !path.exists() {
        return Err(ipred_core::Error::Missing(format!(
            "checkpoint {} (run train first)",
            path.display()
        ))
        .into());
    }
    let ck = load_checkpoint(&path)?;
    ck.check_architecture(
        &ctx.cfg
            .model
            .architecture(kind, ctx.cfg.feature_dim(), classes),
    )?;
    if ck.config_hash != ctx.hash {
        warn!(
            "{} was written under a different configuration",
            path.display()
        );
    }
    Ok(ck.into_model()?)
}

fn load_models(ctx: &Context, fold: &Fold, classes: usize) -> CliResult<ModelSet> {
    let dir = ctx.fold_dir(fold);
    Ok(ModelSet {
        spatial: load_model(ctx, &dir, ModelKind::Spatial, classes)?,
        temporal: load_model(ctx, &dir, ModelKind::Temporal, classes)?,
        spatial_structural: load_model(ctx, &dir, ModelKind::SpatialStructural, classes)?,
        temporal_structural: load_model(ctx, &dir, ModelKind::TemporalStructural, classes)?,
    })
}

pub fn fuse(ctx: &Context) -> CliResult<()> {
    let (videos, classes) = load_features(ctx)?;
    for (fold, train, plan) in fold_plans(ctx, &videos, classes)? {
        let models = load_models(ctx, &fold, classes)?;
        let fit = fit_fusion(&models, &plan.fusion_videos(&train), &ctx.cfg.fusion)?;
        let file = WeightsFile::new(
            fit.weights,
            &ctx.cfg.fusion.ranker(),
            Some(ctx.hash.clone()),
        );
        file.save(&ctx.fold_dir(&fold).join("weights.json"))?;
        info!("fold {}: weights {:?}", fold.name, fit.weights.values());
    }
    Ok(())
}

fn load_weights(
    ctx: &Context,
    fold: &Fold,
    override_path: Option<&Path>,
) -> CliResult<FusionWeights> {
    let path = match override_path {
        Some(p) => p.to_path_buf(),
        None => ctx.fold_dir(fold).join("weights.json"),
    };
    if !path.exists() {
        return Err(ipred_core::Error::Missing(format!(
            "weights {} (run fuse first)",
            path.display()
        ))
        .into());
    }
    Ok(WeightsFile::load(&path)?.w)
}

#[derive(Serialize)]
struct FoldReport {
    name: String,
    test_groups: Vec<u32>,
    weights: FusionWeights,
    table: RatioTable,
    average_table: RatioTable,
    model_tables: BTreeMap<&'static str, RatioTable>,
}

#[derive(Serialize)]
struct VideoReport {
    id: String,
    fold: String,
    /// One-based.
    label: usize,
    /// One-based sequence prediction at ratios 0.1 to 1.0.
    predictions: [usize; NUM_RATIOS],
}

#[derive(Serialize)]
struct EvalReport {
    config_hash: String,
    mode: &'static str,
    num_classes: usize,
    row_order: [&'static str; 4],
    weights_source: String,
    table: RatioTable,
    average_table: RatioTable,
    model_tables: BTreeMap<&'static str, RatioTable>,
    folds: Vec<FoldReport>,
    videos: Vec<VideoReport>,
}

/// Directory receiving eval outputs: `eval`, or `eval_<stem>` when the
/// weights are overridden, so the learned-weight report is never replaced.
pub fn eval_dir(out: &Path, weights: Option<&Path>) -> PathBuf {
    match weights.and_then(|p| p.file_stem()) {
        Some(stem) => out.join(format!("eval_{}", stem.to_string_lossy())),
        None => out.join("eval"),
    }
}

fn mean_of(tables: Vec<RatioTable>) -> CliResult<RatioTable> {
    Ok(RatioTable::mean(&tables)?)
}

pub fn eval(ctx: &Context, weights_override: Option<&Path>) -> CliResult<()> {
    let (videos, classes) = load_features(ctx)?;
    let folds = ctx.cfg.folds(&videos)?;
    let mut fold_reports = Vec::with_capacity(folds.len());
    let mut video_reports = Vec::new();
    let mut csv = String::from("video_id,ratio,p_star,correct\n");
    for fold in &folds {
        let models = load_models(ctx, fold, classes)?;
        let w = load_weights(ctx, fold, weights_override)?;
        let test: Vec<&VideoRecord> = videos.iter().filter(|v| fold.is_test(v)).collect();
        let scored = ScoredSet::from_refs(&models, test)?;
        let outcomes: Vec<VideoOutcome> = scored.outcomes(&w)?;
        let model_tables = ModelKind::ALL
            .iter()
            .map(|&k| Ok((k.name(), scored.table(&FusionWeights::select(k))?)))
            .collect::<CliResult<BTreeMap<_, _>>>()?;
        let table = table_of(&outcomes);
        info!(
            "fold {}: ratio-1.0 accuracy {:.3}",
            fold.name,
            table.at(NUM_RATIOS)
        );
        for o in &outcomes {
            for i in 1..=NUM_RATIOS {
                csv.push_str(&format!(
                    "{},{:.1},{},{}\n",
                    o.id,
                    i as f64 / 10.0,
                    o.predictions[i - 1] + 1,
                    o.correct(i)
                ));
            }
            video_reports.push(VideoReport {
                id: o.id.clone(),
                fold: fold.name.clone(),
                label: o.label + 1,
                predictions: o.predictions.map(|p| p + 1),
            });
        }
        fold_reports.push(FoldReport {
            name: fold.name.clone(),
            test_groups: fold.test_groups.clone(),
            weights: w,
            table,
            average_table: scored.table(&FusionWeights::average())?,
            model_tables,
        });
    }
    let report = EvalReport {
        config_hash: ctx.hash.clone(),
        mode: match ctx.cfg.eval {
            EvalMode::Holdout { .. } => "holdout",
            EvalMode::Loso => "loso",
        },
        num_classes: classes,
        row_order: ModelKind::ALL.map(|k| k.name()),
        weights_source: weights_override.map_or("learned".into(), |p| p.display().to_string()),
        table: mean_of(fold_reports.iter().map(|f| f.table).collect())?,
        average_table: mean_of(fold_reports.iter().map(|f| f.average_table).collect())?,
        model_tables: ModelKind::ALL
            .iter()
            .map(|k| {
                let tables = fold_reports
                    .iter()
                    .map(|f| f.model_tables[k.name()])
                    .collect();
                Ok((k.name(), mean_of(tables)?))
            })
            .collect::<CliResult<_>>()?,
        folds: fold_reports,
        videos: video_reports,
    };
    let dir = eval_dir(&ctx.out, weights_override);
    create_dir(&dir)?;
    write_text(&dir.join("ratio_table.csv"), &report.table.to_csv())?;
    write_text(&dir.join("predictions.csv"), &csv)?;
    write_text(
        &dir.join("report.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    println!("{}", report.table.to_csv().trim_end());
    Ok(())
}

#[derive(Serialize)]
struct StepReport {
    t: usize,
    c_t: Vec<f64>,
    /// One-based.
    p_t: usize,
}

impl From<&TimestepDecision> for StepReport {
    fn from(d: &TimestepDecision) -> Self {
        StepReport {
            t: d.t + 1,
            c_t: d.c_t.clone(),
            p_t: d.p_t + 1,
        }
    }
}

#[derive(Serialize)]
struct PredictReport {
    video_id: String,
    fold: String,
    ratio: f64,
    observed_frames: usize,
    label: usize,
    p_star: usize,
    correct: bool,
    weights: FusionWeights,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<Vec<StepReport>>,
}

pub fn predict(
    ctx: &Context,
    video_id: &str,
    ratio: usize,
    weights_override: Option<&Path>,
    verbose: bool,
) -> CliResult<()> {
    let (videos, classes) = load_features(ctx)?;
    let video = videos.iter().find(|v| v.id == video_id).ok_or_else(|| {
        ipred_core::Error::Missing(format!("video {video_id:?} in the feature file"))
    })?;
    let folds = ctx.cfg.folds(&videos)?;
    let fold = folds
        .iter()
        .find(|f| f.is_test(video))
        .ok_or_else(|| CliError::Config(format!("video {video_id:?} is not in any test fold")))?;
    let models = load_models(ctx, fold, classes)?;
    let w = load_weights(ctx, fold, weights_override)?;
    let upto = slice_observation(video.len(), ratio)?;
    let pred = predict_sequence(&models, &w, video, upto)?;
    let report = PredictReport {
        video_id: video.id.clone(),
        fold: fold.name.clone(),
        ratio: ratio as f64 / 10.0,
        observed_frames: upto,
        label: video.label + 1,
        p_star: pred.p_star + 1,
        correct: pred.p_star == video.label,
        weights: w,
        steps: verbose.then(|| pred.steps.iter().map(StepReport::from).collect()),
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    let dir = ctx.out.join("predict");
    create_dir(&dir)?;
    write_text(&dir.join(format!("{video_id}_ratio{ratio}.json")), &text)?;
    print!("{text}");
    Ok(())
}
