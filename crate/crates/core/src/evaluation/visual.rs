use std::path::Path;

use crate::dataset::{BlobDataset, WeakLabelSet};
use crate::error::{Error, Result};
use crate::model::{decode, encode, ModelConfig};
use crate::numerics::{ParamStore, Tensor};
use crate::trainer::mean_codes;

use super::pgm::{write_grid_csv, write_pgm, GrayMapping};

/// Heat-map color scale bounds.
pub const HEATMAP_CLIP: [f64; 2] = [-3.0, 3.0];

/// Decoded images for a sweep of each latent channel; `images[k][s]` is
/// channel `k` at sweep step `s`.
#[derive(Clone, Debug)]
pub struct TraversalGrid {
    pub side: usize,
    pub values: Vec<f64>,
    pub images: Vec<Vec<Vec<f32>>>,
}

/// Encodes one sample (z = μ) and decodes `steps` points per channel with
/// that channel swept linearly over `range`.
pub fn traverse(
    params: &ParamStore<f32>,
    x: &Tensor<f32>,
    y: Option<&[Tensor<f32>]>,
    cfg: &ModelConfig,
    range: [f64; 2],
    steps: usize,
) -> Result<TraversalGrid> {
    if steps < 2 {
        return Err(Error::Parameter("a traversal needs at least 2 steps".into()));
    }
    if x.rows() != 1 {
        return Err(Error::dim("traverse", x.shape(), &[1, cfg.obs_dim]));
    }
    let code = encode(params, cfg, x, y)?;
    let k = cfg.latent_dim;
    let values: Vec<f64> = (0..steps)
        .map(|s| range[0] + (range[1] - range[0]) * s as f64 / (steps - 1) as f64)
        .collect();
    let mut z = Tensor::zeros(&[k * steps, k]);
    for c in 0..k {
        for (s, &v) in values.iter().enumerate() {
            let row = z.row_mut(c * steps + s);
            row.copy_from_slice(code.mu.row(0));
            row[c] = v as f32;
        }
    }
    let out = decode(params, cfg, &z)?;
    let images = (0..k)
        .map(|c| {
            (0..steps)
                .map(|s| {
                    out.pixel_logits
                        .row(c * steps + s)
                        .iter()
                        .map(|&l| 1.0 / (1.0 + (-l).exp()))
                        .collect()
                })
                .collect()
        })
        .collect();
    let side = (cfg.obs_dim as f64).sqrt().round() as usize;
    Ok(TraversalGrid { side, values, images })
}

/// Sample indices used as traversal bases: corner, center, mid-edges and
/// far corner, each at the middle blob width.
pub fn traversal_panel(ds: &BlobDataset) -> Vec<usize> {
    let s = ds.side();
    let v = ds.variants() / 2;
    let mid = s / 2;
    [(0, 0), (mid, mid), (mid, 0), (0, mid), (s - 1, s - 1)]
        .iter()
        .map(|&(c1, c2)| ds.index_of(c1, c2, v))
        .collect()
}

/// Per-channel maps `map_k[c2][c1]` of the mean code averaged over every
/// width at that position.
pub fn heatmap_from_codes(mu: &Tensor<f64>, ds: &BlobDataset) -> Result<Vec<Tensor<f64>>> {
    if !ds.is_grid() {
        return Err(Error::Config("heat maps need a complete position grid".into()));
    }
    let (n, k) = mu.dims2()?;
    if n != ds.len() {
        return Err(Error::dim("heatmap", mu.shape(), &[ds.len(), k]));
    }
    let side = ds.side();
    let v = ds.variants();
    let mut maps = vec![Tensor::zeros(&[side, side]); k];
    for c1 in 0..side {
        for c2 in 0..side {
            let start = ds.index_of(c1, c2, 0);
            for (ch, map) in maps.iter_mut().enumerate() {
                let mean = (start..start + v).map(|i| mu.get2(i, ch)).sum::<f64>() / v as f64;
                map.data_mut()[c2 * side + c1] = mean;
            }
        }
    }
    Ok(maps)
}

pub fn heatmap(
    params: &ParamStore<f32>,
    ds: &BlobDataset,
    labels: Option<&WeakLabelSet>,
    cfg: &ModelConfig,
) -> Result<Vec<Tensor<f64>>> {
    let code = mean_codes(params, cfg, ds, labels)?;
    heatmap_from_codes(&code.mu.cast(), ds)
}

/// Writes `heatmap_k.pgm` (+ sidecar) and `heatmap_k.csv` per channel.
pub fn write_heatmaps(dir: &Path, maps: &[Tensor<f64>]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mapping = GrayMapping {
        lo: HEATMAP_CLIP[0],
        hi: HEATMAP_CLIP[1],
    };
    for (k, m) in maps.iter().enumerate() {
        let side = m.rows();
        write_pgm(
            &dir.join(format!("heatmap_{k}.pgm")),
            side,
            side,
            m.data(),
            mapping,
            &format!("mean activation of latent channel {k} by blob position (row = c2, column = c1)"),
        )?;
        write_grid_csv(&dir.join(format!("heatmap_{k}.csv")), side, m.data())?;
    }
    Ok(())
}

/// Writes the grid as one mosaic PGM: one tile row per channel, one tile column per step.
pub fn write_traversal(path: &Path, grid: &TraversalGrid) -> Result<()> {
    let side = grid.side;
    let rows = grid.images.len();
    let cols = grid.values.len();
    let width = cols * side;
    let mut pixels = vec![0.0f64; rows * side * width];
    for (r, row) in grid.images.iter().enumerate() {
        for (c, img) in row.iter().enumerate() {
            for v in 0..side {
                for u in 0..side {
                    pixels[(r * side + v) * width + c * side + u] = img[v * side + u] as f64;
                }
            }
        }
    }
    let values: Vec<String> = grid.values.iter().map(|v| format!("{v:.3}")).collect();
    write_pgm(
        path,
        width,
        rows * side,
        &pixels,
        GrayMapping { lo: 0.0, hi: 1.0 },
        &format!(
            "latent traversal: rows = channels 0..{}, columns = z values [{}]; pixels are decoded Bernoulli means",
            rows.saturating_sub(1),
            values.join(", ")
        ),
    )
}
