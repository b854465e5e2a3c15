use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const CANONICAL_SIDE: usize = 64;
pub const CANONICAL_VARIANTS: usize = 25;
pub const CANONICAL_SIGMA_MIN: f64 = 1.5;
pub const CANONICAL_SIGMA_MAX: f64 = 4.0;

/// One blob: center column `c1`, center row `c2`, width `sigma` (pixels).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlobSpec {
    pub c1: f64,
    pub c2: f64,
    pub sigma: f64,
}

/// Renders a peak-1 Gaussian blob; pixel `(u, v)` is column `u`, row `v`,
/// stored row-major at `v * side + u`.
pub fn render_blob(spec: BlobSpec, side: usize) -> Result<Vec<f32>> {
    if !(spec.sigma > 0.0) || !spec.sigma.is_finite() {
        return Err(Error::Parameter(format!("blob sigma must be > 0, got {}", spec.sigma)));
    }
    if side == 0 {
        return Err(Error::Parameter("canvas side must be positive".into()));
    }
    let inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let mut img = Vec::with_capacity(side * side);
    for v in 0..side {
        let dv = v as f64 - spec.c2;
        for u in 0..side {
            let du = u as f64 - spec.c1;
            img.push((-(du * du + dv * dv) * inv).exp() as f32);
        }
    }
    Ok(img)
}

/// `variants` evenly spaced widths in `[min, max]`; a single variant sits
/// at the midpoint.
pub fn sigma_grid(min: f64, max: f64, variants: usize) -> Vec<f64> {
    match variants {
        0 => Vec::new(),
        1 => vec![0.5 * (min + max)],
        v => (0..v)
            .map(|i| min + (max - min) * i as f64 / (v - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub side: usize,
    pub variants: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Recorded in the manifest; the width grid itself is deterministic.
    pub seed: u64,
}

impl GenerateConfig {
    pub fn canonical() -> Self {
        Self {
            side: CANONICAL_SIDE,
            variants: CANONICAL_VARIANTS,
            sigma_min: CANONICAL_SIGMA_MIN,
            sigma_max: CANONICAL_SIGMA_MAX,
            seed: 0,
        }
    }

    pub fn new(side: usize, variants: usize) -> Self {
        Self {
            side,
            variants,
            ..Self::canonical()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.side < 2 {
            return Err(Error::Parameter(format!("side must be >= 2, got {}", self.side)));
        }
        if self.variants < 1 {
            return Err(Error::Parameter("variants must be >= 1".into()));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max.is_finite())
        {
            return Err(Error::Parameter(format!(
                "sigma range [{}, {}] is invalid",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }
}

/// Images, ground-truth centers and widths, ordered position-major
/// (`c1` outer, `c2` inner) and width-minor.
#[derive(Clone, Debug)]
pub struct BlobDataset {
    pub config: GenerateConfig,
    pub sigmas_grid: Vec<f64>,
    /// `N × side²`, pixels in `[0, 1]`.
    pub images: Tensor<f32>,
    /// `(c1, c2)` per sample.
    pub coords: Vec<[u32; 2]>,
    pub sigmas: Vec<f32>,
    pub content_hash: String,
}

impl BlobDataset {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn side(&self) -> usize {
        self.config.side
    }

    pub fn variants(&self) -> usize {
        self.config.variants
    }

    /// Observation dimension `side²`.
    pub fn dim(&self) -> usize {
        self.config.side * self.config.side
    }

    /// Sample index of `(c1, c2, variant)` in the canonical ordering.
    pub fn index_of(&self, c1: usize, c2: usize, variant: usize) -> usize {
        (c1 * self.side() + c2) * self.variants() + variant
    }

    /// True when every position occurs exactly `variants` times in canonical order.
    pub fn is_grid(&self) -> bool {
        let (side, v) = (self.side(), self.variants());
        self.len() == side * side * v
            && self.coords.iter().enumerate().all(|(i, c)| {
                let pos = i / v;
                c[0] as usize == pos / side && c[1] as usize == pos % side
            })
    }
}

pub(crate) fn hash_arrays(images: &[f32], coords: &[[u32; 2]], sigmas: &[f32]) -> String {
    let mut h = Sha256::new();
    for v in images {
        h.update(v.to_le_bytes());
    }
    for c in coords {
        h.update((c[0] as f32).to_le_bytes());
        h.update((c[1] as f32).to_le_bytes());
    }
    for s in sigmas {
        h.update(s.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn generate_dataset(config: &GenerateConfig) -> Result<BlobDataset> {
    config.validate()?;
    let side = config.side;
    let grid = sigma_grid(config.sigma_min, config.sigma_max, config.variants);
    let per_position: Vec<Vec<f32>> = (0..side * side)
        .into_par_iter()
        .map(|pos| {
            let (c1, c2) = (pos / side, pos % side);
            let mut out = Vec::with_capacity(grid.len() * side * side);
            for &sigma in &grid {
                let spec = BlobSpec {
                    c1: c1 as f64,
                    c2: c2 as f64,
                    sigma,
                };
                out.extend(render_blob(spec, side).expect("validated sigma"));
            }
            out
        })
        .collect();
    let n = side * side * grid.len();
    let mut images = Vec::with_capacity(n * side * side);
    let mut coords = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    for (pos, block) in per_position.into_iter().enumerate() {
        images.extend(block);
        for &s in &grid {
            coords.push([(pos / side) as u32, (pos % side) as u32]);
            sigmas.push(s as f32);
        }
    }
    let content_hash = hash_arrays(&images, &coords, &sigmas);
    Ok(BlobDataset {
        config: config.clone(),
        sigmas_grid: grid,
        images: Tensor::new(&[n, side * side], images)?,
        coords,
        sigmas,
        content_hash,
    })
}
