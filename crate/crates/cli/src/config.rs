use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ipred_core::context::{FeatureExtractor, GridExtractor, VideoRecord};
use ipred_core::eval::{FlowConfig, FusionConfig, ModelConfig, SynthConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, CliResult};

/// The single experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub extractor: GridExtractor,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    pub eval: EvalMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Rendered by `synth` into `<out>/dataset`.
    Synthetic {
        num_classes: usize,
        videos_per_class: usize,
        frames_per_video: usize,
        groups: u32,
        #[serde(default = "default_width")]
        width: usize,
        #[serde(default = "default_height")]
        height: usize,
    },
    /// A directory laid out like `synth` output.
    Frames { path: PathBuf },
    /// A ready feature file.
    Features {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
    },
}

fn default_width() -> usize {
    80
}

fn default_height() -> usize {
    48
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalMode {
    /// Train on every group except `test_groups`, test on those.
    Holdout { test_groups: Vec<u32> },
    /// One fold per group.
    Loso,
}

/// One train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub name: String,
    pub test_groups: Vec<u32>,
}

impl Fold {
    pub fn is_test(&self, video: &VideoRecord) -> bool {
        self.test_groups.contains(&video.group)
    }
}

impl Config {
    /// Reads the config, applies the seed override and resolves relative
    /// dataset paths against the config file's directory.
    pub fn load(path: &Path, seed: Option<u64>) -> CliResult<Config> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.dataset {
            DatasetConfig::Frames { path } | DatasetConfig::Features { path, .. } => {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
                if !path.exists() {
                    return Err(CliError::Config(format!(
                        "dataset path {} does not exist",
                        path.display()
                    )));
                }
            }
            DatasetConfig::Synthetic { .. } => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        GridExtractor::new(self.extractor.grid, self.extractor.bins)?;
        if let EvalMode::Holdout { test_groups } = &self.eval {
            if test_groups.is_empty() {
                return Err(CliError::Config(
                    "holdout mode needs at least one test group".into(),
                ));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the effective config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn feature_dim(&self) -> usize {
        self.extractor.dim()
    }

    pub fn synth(&self) -> Option<SynthConfig> {
        match self.dataset {
            DatasetConfig::Synthetic {
                num_classes,
                videos_per_class,
                frames_per_video,
                groups,
                width,
                height,
            } => Some(SynthConfig {
                num_classes,
                videos_per_class,
                frames_per_video,
                groups,
                width,
                height,
                seed: self.seed,
            }),
            _ => None,
        }
    }

    /// Partitions of the dataset, in a fixed order.
    pub fn folds(&self, videos: &[VideoRecord]) -> CliResult<Vec<Fold>> {
        let groups: BTreeSet<u32> = videos.iter().map(|v| v.group).collect();
        match &self.eval {
            EvalMode::Holdout { test_groups } => {
                let tests: BTreeSet<u32> = test_groups.iter().copied().collect();
                if let Some(g) = tests.iter().find(|g| !groups.contains(g)) {
                    return Err(CliError::Config(format!("test group {g} has no videos")));
                }
                if tests.len() == groups.len() {
                    return Err(CliError::Config("holdout leaves no training group".into()));
                }
                Ok(vec![Fold {
                    name: "holdout".into(),
                    test_groups: tests.into_iter().collect(),
                }])
            }
            EvalMode::Loso => {
                if groups.len() < 2 {
                    return Err(CliError::Config(format!(
                        "cross-validation needs at least 2 groups, found {}",
                        groups.len()
                    )));
                }
                Ok(groups
                    .into_iter()
                    .map(|g| Fold {
                        name: format!("group_{g}"),
                        test_groups: vec![g],
                    })
                    .collect())
            }
        }
    }
}
