//! Model checkpoints: a binary weight file plus a JSON manifest beside it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::{FeatureConfig, FeatureStats};
use super::train::{TrainConfig, TrainReport};
use super::{ModelSpec, NeuralScorer, ScorerError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"GGCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model: ModelSpec,
    pub feature_config: FeatureConfig,
    pub fold_id: usize,
    pub stats_hash: String,
    pub embedding_provider: String,
    pub embedding_version: String,
    pub train_config: TrainConfig,
    pub report: Option<TrainReport>,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
    values: Vec<Vec<f64>>,
    stats: FeatureStats,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    model: &dyn NeuralScorer<T>,
    stats: &FeatureStats,
    manifest: &CheckpointManifest,
) -> Result<(), ScorerError> {
    let p = model.params();
    let payload = Payload {
        names: p.names.clone(),
        shapes: p.values.iter().map(Matrix::shape).collect(),
        values: p
            .values
            .iter()
            .map(|m| m.data().iter().map(|x| x.f64()).collect())
            .collect(),
        stats: stats.clone(),
    };
    let mut bytes = MAGIC.to_vec();
    bytes.extend(CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend(bincode::serialize(&payload).map_err(|e| ScorerError::Checkpoint(e.to_string()))?);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    let json = serde_json::to_string_pretty(manifest).map_err(|e| ScorerError::Checkpoint(e.to_string()))?;
    fs::write(manifest_path(path), json)?;
    Ok(())
}

pub struct LoadedCheckpoint<T: Scalar> {
    pub model: Box<dyn NeuralScorer<T>>,
    pub stats: FeatureStats,
    pub manifest: CheckpointManifest,
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<LoadedCheckpoint<T>, ScorerError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(ScorerError::Checkpoint(format!(
            "{} is not a checkpoint",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(ScorerError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let payload: Payload = bincode::deserialize(&bytes[12..]).map_err(|e| ScorerError::Checkpoint(e.to_string()))?;
    let json = fs::read_to_string(manifest_path(path))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&json).map_err(|e| ScorerError::Checkpoint(e.to_string()))?;
    if payload.stats.hash() != manifest.stats_hash {
        return Err(ScorerError::Checkpoint(
            "feature stats do not match the manifest".into(),
        ));
    }
    if payload.stats.fold_id != manifest.fold_id {
        return Err(ScorerError::FoldMismatch {
            stats: payload.stats.fold_id,
            requested: manifest.fold_id,
        });
    }
    let mut model = manifest.model.build::<T>();
    let store = model.params_mut();
    if store.names != payload.names {
        return Err(ScorerError::Checkpoint(
            "parameter layout does not match the model".into(),
        ));
    }
    for (i, ((r, c), v)) in payload.shapes.iter().zip(payload.values).enumerate() {
        if store.values[i].shape() != (*r, *c) {
            return Err(ScorerError::Checkpoint(format!(
                "shape mismatch for {}",
                store.names[i]
            )));
        }
        store.values[i] = Matrix::from_vec(*r, *c, v.into_iter().map(T::of).collect());
    }
    Ok(LoadedCheckpoint {
        model,
        stats: payload.stats,
        manifest,
    })
}
