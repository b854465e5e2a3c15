//! The Blobs dataset: one white Gaussian blob per image on a black square
//! canvas, every integer center position repeated over a grid of blob
//! widths, with angle and distance membership labels.

mod blobs;
mod labels;
mod store;

pub use blobs::{
    generate_dataset, render_blob, sigma_grid, BlobDataset, BlobSpec, GenerateConfig,
    CANONICAL_SIDE, CANONICAL_SIGMA_MAX, CANONICAL_SIGMA_MIN, CANONICAL_VARIANTS,
};
pub use labels::{
    angle_of, bin_index, bin_label, build_weak_labels, distance_of, Factor, WeakLabelConfig,
    WeakLabelSet,
};
pub use store::{load_dataset, save_dataset, DatasetManifest, SectionInfo, StoredDataset};
