use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{BlobDataset, WeakLabelSet};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::{ParamStore, Tensor};
use crate::trainer::mean_codes;

/// Channels whose value span is below this are treated as constant.
pub const DEGENERATE_SPAN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cartesian,
    Polar,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Cartesian => "cartesian",
            Task::Polar => "polar",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(Task::Cartesian),
            "polar" => Ok(Task::Polar),
            other => Err(Error::Parameter(format!("unknown task `{other}`"))),
        }
    }
}

/// Target ranges the code channels are rescaled to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRanges {
    /// Upper end of each Cartesian coordinate range `[0, cartesian]`.
    pub cartesian: f64,
    pub angle: f64,
    pub distance: f64,
}

impl MetricRanges {
    /// Ranges spanned by the coordinates of a `side`-wide canvas: `[0, side - 1]`
    /// per coordinate, `[0, π/2]` for angle, `[0, √2·(side - 1)]` for distance.
    /// A representation equal to the ground truth is then recovered exactly.
    pub fn for_side(side: usize) -> Self {
        let extent = side.saturating_sub(1) as f64;
        Self {
            cartesian: extent,
            angle: FRAC_PI_2,
            distance: std::f64::consts::SQRT_2 * extent,
        }
    }

    /// The published constants for the 64-pixel canvas: `[0, 64]` and `[0, 90.5]`.
    pub fn published() -> Self {
        Self {
            cartesian: 64.0,
            angle: FRAC_PI_2,
            distance: 90.5,
        }
    }
}

/// Mean codes of every sample together with the ground-truth centers.
#[derive(Clone, Debug)]
pub struct RepresentationMatrix {
    /// `N × K`
    pub mu: Tensor<f64>,
    pub coords: Vec<[f64; 2]>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl RepresentationMatrix {
    pub fn new(mu: Tensor<f64>, coords: Vec<[f64; 2]>) -> Result<Self> {
        let (n, k) = mu.dims2()?;
        if coords.len() != n {
            return Err(Error::dim("representation", mu.shape(), &[coords.len(), 2]));
        }
        if !mu.is_finite() {
            return Err(Error::Domain("representation has non-finite entries".into()));
        }
        let mut min = vec![f64::INFINITY; k];
        let mut max = vec![f64::NEG_INFINITY; k];
        for i in 0..n {
            for (c, &v) in mu.row(i).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(Self { mu, coords, min, max })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.cols()
    }

    pub fn channel(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.mu.get2(i, k)).collect()
    }

    pub fn degenerate(&self) -> Vec<bool> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| hi - lo < DEGENERATE_SPAN)
            .collect()
    }
}

/// Mean codes (ε = 0) of the whole dataset.
pub fn represent(
    params: &ParamStore<f32>,
    ds: &BlobDataset,
    labels: Option<&WeakLabelSet>,
    cfg: &ModelConfig,
) -> Result<RepresentationMatrix> {
    let code = mean_codes(params, cfg, ds, labels)?;
    let coords = ds.coords.iter().map(|c| [c[0] as f64, c[1] as f64]).collect();
    let rep = RepresentationMatrix::new(code.mu.cast(), coords)?;
    for (k, d) in rep.degenerate().iter().enumerate() {
        if *d {
            log::warn!("latent channel {k} is constant over the dataset");
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rescaled {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// Maps `[min, max]` of `values` linearly onto `target`, reversed when
/// `invert`. A constant channel maps to the target midpoint.
pub fn rescale_channel(values: &[f64], target: [f64; 2], invert: bool) -> Rescaled {
    let [lo, hi] = target;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max - min >= DEGENERATE_SPAN) {
        return Rescaled {
            values: vec![0.5 * (lo + hi); values.len()],
            degenerate: true,
        };
    }
    let scale = (hi - lo) / (max - min);
    let values = values
        .iter()
        .map(|&v| {
            let r = (v - min) * scale + lo;
            if invert {
                hi + lo - r
            } else {
                r
            }
        })
        .collect();
    Rescaled {
        values,
        degenerate: false,
    }
}

/// Best channel assignment for one task and the squared error it achieves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub task: Task,
    pub mse: f64,
    /// `(i, j)`: channel for c1 (or angle) and for c2 (or distance).
    pub channel_assignment: (usize, usize),
    pub inversion_flags: (bool, bool),
    pub degenerate_channels: Vec<usize>,
}

fn search(
    rep: &RepresentationMatrix,
    task: Task,
    first: [f64; 2],
    second: [f64; 2],
    to_cartesian: impl Fn(f64, f64) -> (f64, f64),
) -> Result<MetricResult> {
    let k = rep.latent_dim();
    if k < 2 {
        return Err(Error::Parameter(format!("{task} MSE needs K >= 2, got {k}")));
    }
    let channels: Vec<Vec<f64>> = (0..k).map(|c| rep.channel(c)).collect();
    let rescale = |target: [f64; 2]| -> Vec<[Vec<f64>; 2]> {
        channels
            .iter()
            .map(|ch| {
                [
                    rescale_channel(ch, target, false).values,
                    rescale_channel(ch, target, true).values,
                ]
            })
            .collect()
    };
    let a = rescale(first);
    let b = rescale(second);
    let n = rep.len() as f64;
    let mut best: Option<MetricResult> = None;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            for inv_i in [false, true] {
                for inv_j in [false, true] {
                    let u = &a[i][inv_i as usize];
                    let v = &b[j][inv_j as usize];
                    let mut acc = 0.0;
                    for ((&ui, &vi), c) in u.iter().zip(v).zip(&rep.coords) {
                        let (x1, x2) = to_cartesian(ui, vi);
                        acc += (c[0] - x1).powi(2) + (c[1] - x2).powi(2);
                    }
                    let mse = acc / n;
                    if best.as_ref().map_or(true, |b| mse < b.mse) {
                        best = Some(MetricResult {
                            task,
                            mse,
                            channel_assignment: (i, j),
                            inversion_flags: (inv_i, inv_j),
                            degenerate_channels: Vec::new(),
                        });
                    }
                }
            }
        }
    }
    let mut best = best.expect("K >= 2 gives at least one candidate");
    best.degenerate_channels = rep
        .degenerate()
        .iter()
        .enumerate()
        .filter_map(|(c, &d)| d.then_some(c))
        .collect();
    Ok(best)
}

/// Lowest MSE of `(c1, c2)` recovered from two channels rescaled to the
/// coordinate range, over all ordered channel pairs and inversions.
pub fn cartesian_mse(rep: &RepresentationMatrix, ranges: MetricRanges) -> Result<MetricResult> {
    let r = [0.0, ranges.cartesian];
    search(rep, Task::Cartesian, r, r, |a, b| (a, b))
}

/// Lowest MSE of `(c1, c2)` recovered from an angle channel and a distance
/// channel through the polar-to-Cartesian map.
pub fn polar_mse(rep: &RepresentationMatrix, ranges: MetricRanges) -> Result<MetricResult> {
    search(
        rep,
        Task::Polar,
        [0.0, ranges.angle],
        [0.0, ranges.distance],
        |phi, d| (d * phi.cos(), d * phi.sin()),
    )
}

pub fn mse_for(task: Task, rep: &RepresentationMatrix, ranges: MetricRanges) -> Result<MetricResult> {
    match task {
        Task::Cartesian => cartesian_mse(rep, ranges),
        Task::Polar => polar_mse(rep, ranges),
    }
}
