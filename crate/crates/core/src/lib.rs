//! Weakly-supervised disentanglement laboratory.
//!
//! Builds the Blobs dataset with angle/distance membership labels, trains
//! WeLa-VAE (label-conditioned encoder, label heads on the decoder, total
//! correlation penalty) and its β-TCVAE baseline, and scores the learned
//! mean codes with the coordinate-recovery MSE protocol for Cartesian and
//! polar representations.
//!
//! Module map:
//!
//! * [`numerics`]: tensors, affine/ReLU kernels, parameter store, Adam, gradient checking
//! * [`dataset`]: blob rendering, dataset generation, weak labels, on-disk format
//! * [`model`]: encoder/decoder networks and checkpoints
//! * [`objective`]: reconstruction, KL, total-correlation and assembled losses
//! * [`trainer`]: deterministic per-seed training and label accuracy
//! * [`evaluation`]: coordinate-recovery metrics, traversals and heat maps
//! * [`experiments`]: sweeps, reports and the command-line front end

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod model;
pub mod numerics;
pub mod objective;
pub mod trainer;

pub use error::{Error, Result};
