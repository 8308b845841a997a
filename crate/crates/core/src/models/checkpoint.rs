use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, ModelKind};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Shape-defining hyperparameters of one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub classes: usize,
    pub head_hidden: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lstm_hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Versioned model file: architecture, provenance hash and every parameter
/// tensor as a flat row-major array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_hash: String,
    pub architecture: Architecture,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_model<M: Classifier>(model: &M, config_hash: &str) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            config_hash: config_hash.to_string(),
            architecture: model.architecture(),
            tensors: model
                .tensors()
                .iter()
                .map(|t| TensorRecord {
                    name: t.name.to_string(),
                    shape: [t.shape.0, t.shape.1],
                    data: t.data.to_vec(),
                })
                .collect(),
        }
    }

    /// Fails unless the stored architecture equals `expected`.
    pub fn check_architecture(&self, expected: &Architecture) -> Result<()> {
        if &self.architecture != expected {
            return Err(Error::Checkpoint(format!(
                "checkpoint architecture {:?} does not match configured {:?}",
                self.architecture, expected
            )));
        }
        Ok(())
    }

    /// Rebuilds the model, validating every tensor's name and shape against
    /// the declared architecture.
    pub fn into_model<M: Classifier>(self) -> Result<M> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format version {}",
                self.format_version
            )));
        }
        let mut model = M::from_architecture(&self.architecture)?;
        let expected: Vec<(String, [usize; 2])> = model
            .tensors()
            .iter()
            .map(|t| (t.name.to_string(), [t.shape.0, t.shape.1]))
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "{} tensors declared, architecture needs {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        for ((name, shape), rec) in expected.iter().zip(&self.tensors) {
            if name != &rec.name || shape != &rec.shape || rec.data.len() != shape[0] * shape[1] {
                return Err(Error::Checkpoint(format!(
                    "tensor {:?} {:?} with {} values does not match expected {name:?} {shape:?}",
                    rec.name,
                    rec.shape,
                    rec.data.len()
                )));
            }
        }
        for (dst, rec) in model.tensors_mut().into_iter().zip(&self.tensors) {
            dst.copy_from_slice(&rec.data);
        }
        Ok(model)
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(checkpoint)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
