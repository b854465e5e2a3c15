use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

use super::config::ModelConfig;

pub const CHECKPOINT_MANIFEST: &str = "checkpoint.json";
pub const CHECKPOINT_BLOB: &str = "checkpoint.bin";
const FORMAT: &str = "wela-checkpoint/1";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistorySummary {
    pub steps: usize,
    pub first_epoch_mean_total: f64,
    pub last_epoch_mean_total: f64,
    pub final_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    pub seed: u64,
    pub epoch: usize,
    pub loss: LossHistorySummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    endianness: String,
    dtype: String,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
    sha256: String,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParamStore<f32>,
    pub sha256: String,
}

/// Writes `checkpoint.json` and `checkpoint.bin` (parameters in name order,
/// little-endian `f32`). Returns the blob hash.
pub fn save_checkpoint(dir: &Path, params: &ParamStore<f32>, meta: &CheckpointMeta) -> Result<String> {
    fs::create_dir_all(dir)?;
    let mut blob = Vec::with_capacity(4 * params.num_scalars());
    let mut tensors = Vec::with_capacity(params.len());
    for (name, p) in params.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: p.value.shape().to_vec(),
            offset: blob.len() as u64,
        });
        for v in p.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sha256 = hex::encode(Sha256::digest(&blob));
    fs::write(dir.join(CHECKPOINT_BLOB), &blob)?;
    let manifest = Manifest {
        format: FORMAT.into(),
        endianness: "little".into(),
        dtype: "f32".into(),
        meta: meta.clone(),
        tensors,
        sha256: sha256.clone(),
    };
    fs::write(dir.join(CHECKPOINT_MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(sha256)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let mpath = dir.join(CHECKPOINT_MANIFEST);
    let manifest: Manifest = serde_json::from_slice(&fs::read(&mpath)?)?;
    if manifest.format != FORMAT {
        return Err(Error::format(&mpath, "unsupported checkpoint format"));
    }
    let bpath = dir.join(CHECKPOINT_BLOB);
    let blob = fs::read(&bpath)?;
    if hex::encode(Sha256::digest(&blob)) != manifest.sha256 {
        return Err(Error::format(&bpath, "checkpoint hash mismatch"));
    }
    let mut params = ParamStore::new();
    for t in &manifest.tensors {
        let n: usize = t.shape.iter().product();
        let start = t.offset as usize;
        let bytes = blob
            .get(start..start + 4 * n)
            .ok_or_else(|| Error::format(&bpath, format!("tensor `{}` out of bounds", t.name)))?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        params.insert(t.name.clone(), Tensor::new(&t.shape, data)?);
    }
    Ok(Checkpoint {
        meta: manifest.meta,
        params,
        sha256: manifest.sha256,
    })
}

/// Hash of a stored checkpoint when it is present and intact.
pub fn verify_checkpoint(dir: &Path) -> Option<String> {
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(dir.join(CHECKPOINT_MANIFEST)).ok()?).ok()?;
    let blob = fs::read(dir.join(CHECKPOINT_BLOB)).ok()?;
    (hex::encode(Sha256::digest(&blob)) == manifest.sha256).then_some(manifest.sha256)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn round_trip_preserves_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ModelConfig::wela(12, 2, 2, 3.0, 1.0).with_hidden(5);
        let params = init_params(&cfg, 4).unwrap();
        let meta = CheckpointMeta {
            config: cfg,
            seed: 4,
            epoch: 1,
            loss: LossHistorySummary::default(),
        };
        let hash = save_checkpoint(dir.path(), &params, &meta).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.params, params);
        assert_eq!(back.meta, meta);
        assert_eq!(verify_checkpoint(dir.path()), Some(hash));
    }
}
