use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::blobs::{hash_arrays, BlobDataset, GenerateConfig};
use super::labels::{WeakLabelConfig, WeakLabelSet};

pub const MANIFEST_FILE: &str = "dataset.json";
pub const BLOB_FILE: &str = "dataset.bin";
const FORMAT: &str = "wela-blobs/1";

/// Location of one array inside the binary blob.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionInfo {
    pub name: String,
    /// Byte offset from the start of the blob.
    pub offset: u64,
    pub shape: Vec<usize>,
}

impl SectionInfo {
    fn byte_len(&self) -> u64 {
        4 * self.shape.iter().product::<usize>() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub endianness: String,
    pub dtype: String,
    pub generate: GenerateConfig,
    pub sigma_grid: Vec<f64>,
    pub samples: usize,
    pub dim: usize,
    /// Hash over images, coordinates and widths.
    pub content_hash: String,
    /// Hash of the whole binary blob.
    pub blob_sha256: String,
    pub label_sets: Vec<WeakLabelConfig>,
    pub sections: Vec<SectionInfo>,
}

/// A dataset read back from disk with every label set it was saved with.
#[derive(Clone, Debug)]
pub struct StoredDataset {
    pub dataset: BlobDataset,
    pub labels: Vec<WeakLabelSet>,
    pub manifest: DatasetManifest,
}

impl StoredDataset {
    pub fn labels_for(&self, p: usize) -> Option<&WeakLabelSet> {
        self.labels.iter().find(|l| l.p() == p)
    }
}

fn write_f32s(w: &mut impl Write, hasher: &mut Sha256, values: impl Iterator<Item = f32>) -> Result<()> {
    let mut buf = Vec::with_capacity(1 << 16);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
        if buf.len() >= 1 << 16 {
            hasher.update(&buf);
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    hasher.update(&buf);
    w.write_all(&buf)?;
    Ok(())
}

/// Writes `dataset.json` and `dataset.bin` into `dir` and returns the manifest.
///
/// Blob layout: images, coordinates, widths, then one section per
/// (label set, factor), all little-endian `f32`.
pub fn save_dataset(dir: &Path, ds: &BlobDataset, labels: &[WeakLabelSet]) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let n = ds.len();
    let mut sections = Vec::new();
    let mut offset = 0u64;
    let mut push = |name: String, shape: Vec<usize>| {
        let s = SectionInfo { name, offset, shape };
        offset += s.byte_len();
        sections.push(s);
    };
    push("images".into(), vec![n, ds.dim()]);
    push("coords".into(), vec![n, 2]);
    push("sigmas".into(), vec![n]);
    for set in labels {
        if set.len() != n {
            return Err(Error::Config(format!(
                "label set p={} has {} rows for {} samples",
                set.p(),
                set.len(),
                n
            )));
        }
        for f in set.factors() {
            push(format!("labels/p{}/{}", set.p(), f), vec![n, set.p()]);
        }
    }

    let mut hasher = Sha256::new();
    let mut w = BufWriter::new(File::create(dir.join(BLOB_FILE))?);
    write_f32s(&mut w, &mut hasher, ds.images.data().iter().copied())?;
    write_f32s(
        &mut w,
        &mut hasher,
        ds.coords.iter().flat_map(|c| [c[0] as f32, c[1] as f32]),
    )?;
    write_f32s(&mut w, &mut hasher, ds.sigmas.iter().copied())?;
    for set in labels {
        for t in &set.onehots {
            write_f32s(&mut w, &mut hasher, t.data().iter().copied())?;
        }
    }
    w.flush()?;

    let manifest = DatasetManifest {
        format: FORMAT.into(),
        endianness: "little".into(),
        dtype: "f32".into(),
        generate: ds.config.clone(),
        sigma_grid: ds.sigmas_grid.clone(),
        samples: n,
        dim: ds.dim(),
        content_hash: ds.content_hash.clone(),
        blob_sha256: hex::encode(hasher.finalize()),
        label_sets: labels.iter().map(|l| l.config.clone()).collect(),
        sections,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn section<'a>(manifest: &'a DatasetManifest, name: &str, path: &Path) -> Result<&'a SectionInfo> {
    manifest
        .sections
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::format(path, format!("missing section `{name}`")))
}

fn read_f32s(blob: &[u8], s: &SectionInfo, path: &Path) -> Result<Vec<f32>> {
    let start = s.offset as usize;
    let end = start + s.byte_len() as usize;
    let bytes = blob
        .get(start..end)
        .ok_or_else(|| Error::format(path, format!("section `{}` out of bounds", s.name)))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

/// Reads a dataset directory (or its manifest path) and verifies both hashes.
pub fn load_dataset(path: &Path) -> Result<StoredDataset> {
    let dir: PathBuf = if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    if manifest.format != FORMAT || manifest.endianness != "little" || manifest.dtype != "f32" {
        return Err(Error::format(&manifest_path, "unsupported format"));
    }
    let blob_path = dir.join(BLOB_FILE);
    let blob = fs::read(&blob_path)?;
    if hex::encode(Sha256::digest(&blob)) != manifest.blob_sha256 {
        return Err(Error::format(&blob_path, "blob hash mismatch"));
    }
    let n = manifest.samples;
    let images = read_f32s(&blob, section(&manifest, "images", &blob_path)?, &blob_path)?;
    let coords_flat = read_f32s(&blob, section(&manifest, "coords", &blob_path)?, &blob_path)?;
    let sigmas = read_f32s(&blob, section(&manifest, "sigmas", &blob_path)?, &blob_path)?;
    let coords: Vec<[u32; 2]> = coords_flat
        .chunks_exact(2)
        .map(|c| [c[0] as u32, c[1] as u32])
        .collect();
    if hash_arrays(&images, &coords, &sigmas) != manifest.content_hash {
        return Err(Error::format(&blob_path, "content hash mismatch"));
    }
    let dataset = BlobDataset {
        config: manifest.generate.clone(),
        sigmas_grid: manifest.sigma_grid.clone(),
        images: Tensor::new(&[n, manifest.dim], images)?,
        coords,
        sigmas,
        content_hash: manifest.content_hash.clone(),
    };
    let mut labels = Vec::new();
    for cfg in &manifest.label_sets {
        let mut onehots = Vec::new();
        for f in &cfg.factors {
            let s = section(&manifest, &format!("labels/p{}/{}", cfg.p, f), &blob_path)?;
            onehots.push(Tensor::new(&[n, cfg.p], read_f32s(&blob, s, &blob_path)?)?);
        }
        labels.push(WeakLabelSet {
            config: cfg.clone(),
            onehots,
        });
    }
    Ok(StoredDataset {
        dataset,
        labels,
        manifest,
    })
}
