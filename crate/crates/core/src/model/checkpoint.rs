//! Versioned JSON checkpoints. Parameters are stored as shortest
//! round-trip decimal renderings of their `f64` values, so a reloaded model
//! predicts bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainConfig;
use super::{EncoderConfig, QeModel, Vocab};
use crate::data::Direction;
use crate::error::{Error, Result};
use crate::io;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub best_val_rmse: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub best_step: usize,
    pub directions: Vec<Direction>,
    pub train_size: usize,
    pub val_size: usize,
    pub train_config: TrainConfig,
    /// Resolved run configuration and tool version of the producing command.
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

/// A trained model with its training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub model: QeModel,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u32,
    vocab: Vocab,
    encoder_config: EncoderConfig,
    parameters: Vec<NamedTensor>,
    head: Vec<NamedTensor>,
    metadata: TrainingMetadata,
}

impl ModelCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        let store = self.model.params();
        let (mut parameters, mut head) = (Vec::new(), Vec::new());
        for (i, spec) in store.specs().iter().enumerate() {
            let t = NamedTensor {
                name: spec.name.clone(),
                shape: spec.shape.clone(),
                data: store.tensor(i).to_vec(),
            };
            if spec.name.starts_with("head.") {
                head.push(t);
            } else {
                parameters.push(t);
            }
        }
        let file = CheckpointFile {
            format_version: FORMAT_VERSION,
            vocab: self.model.vocab().clone(),
            encoder_config: self.model.config().clone(),
            parameters,
            head,
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable JSON: {e}")))?;
        match value.get("format_version") {
            Some(v) if v.as_u64() == Some(u64::from(FORMAT_VERSION)) => {}
            Some(v) => {
                return Err(Error::CheckpointVersion {
                    found: v.to_string(),
                    expected: FORMAT_VERSION,
                })
            }
            None => return Err(Error::Checkpoint("missing format_version".into())),
        }
        let file: CheckpointFile =
            serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut model = QeModel::new(file.vocab, file.encoder_config)?;
        let mut tensors: Vec<NamedTensor> = file.parameters.into_iter().chain(file.head).collect();
        let specs = model.params().specs().to_vec();
        if tensors.len() != specs.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (id, spec) in specs.iter().enumerate() {
            let pos = tensors
                .iter()
                .position(|t| t.name == spec.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {}", spec.name)))?;
            let t = tensors.swap_remove(pos);
            if t.shape != spec.shape || t.data.len() != spec.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} has shape {:?} with {} values, expected {:?}",
                    spec.name,
                    t.shape,
                    t.data.len(),
                    spec.shape
                )));
            }
            model.params_mut().set_tensor(id, &t.data);
        }
        Ok(Self {
            model,
            metadata: file.metadata,
        })
    }
}

pub fn save_checkpoint(checkpoint: &ModelCheckpoint, path: &Path) -> Result<()> {
    io::write_atomic(path, checkpoint.to_json()?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelCheckpoint::from_json(&text)
}
