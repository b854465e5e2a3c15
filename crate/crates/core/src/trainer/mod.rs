//! Deterministic per-seed training and label accuracy.
//!
//! One seed drives weight initialization (its own stream) and a second
//! stream shared by the epoch shuffles and the reparameterization noise.

mod log;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{BlobDataset, WeakLabelSet};
use crate::error::{Error, Result};
use crate::model::{
    decode, encode, init_params, save_checkpoint, CheckpointMeta, LatentCode, LossHistorySummary,
    ModelConfig,
};
use crate::numerics::{adam_step, AdamConfig, AdamState, ParamStore, Tensor};
use crate::objective::{wela_loss_and_grad, Batch, LossBreakdown};

pub use self::log::{read_log_csv, write_log_csv, LogRow};

pub const LOG_FILE: &str = "train_log.csv";
pub const RUN_FILE: &str = "run.json";
const EVAL_CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        Self {
            model,
            learning_rate: 1e-4,
            batch_size: 256,
            epochs: 150,
            seed,
            shuffle: true,
        }
    }
}

/// In-memory outcome of [`fit`].
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub params: ParamStore<f32>,
    pub log: Vec<LogRow>,
    pub final_loss: LossBreakdown,
    pub loss_summary: LossHistorySummary,
}

/// Persisted outcome of [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: TrainConfig,
    pub checkpoint_dir: PathBuf,
    pub checkpoint_sha256: String,
    pub log_path: PathBuf,
    pub final_loss: LossBreakdown,
    pub label_accuracy: Vec<f64>,
    pub wall_seconds: f64,
    pub seed: u64,
    pub threads: usize,
    /// Dataset the run was trained on, when it came from disk.
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub dataset_hash: String,
}

fn validate(ds: &BlobDataset, labels: Option<&WeakLabelSet>, cfg: &TrainConfig) -> Result<()> {
    cfg.model.validate()?;
    cfg.model.validate_latent_matches_labels()?;
    if cfg.model.obs_dim != ds.dim() {
        return Err(Error::Config(format!(
            "model expects D={} but the dataset has D={}",
            cfg.model.obs_dim,
            ds.dim()
        )));
    }
    if cfg.epochs < 1 {
        return Err(Error::Config("epochs must be >= 1".into()));
    }
    if cfg.batch_size < 1 || cfg.batch_size > ds.len() {
        return Err(Error::Config(format!(
            "batch size {} must be in [1, {}]",
            cfg.batch_size,
            ds.len()
        )));
    }
    match (cfg.model.is_labeled(), labels) {
        (false, None) => Ok(()),
        (true, Some(l)) if l.dims() == cfg.model.label_dims && l.len() == ds.len() => Ok(()),
        (true, Some(l)) => Err(Error::Config(format!(
            "label widths {:?} do not match the model's {:?}",
            l.dims(),
            cfg.model.label_dims
        ))),
        (true, None) => Err(Error::Config("labeled model requires weak labels".into())),
        (false, Some(_)) => Err(Error::Config("unlabeled model given weak labels".into())),
    }
}

/// Trains in memory. Any non-finite loss term or gradient aborts with
/// [`Error::Diverged`].
pub fn fit(ds: &BlobDataset, labels: Option<&WeakLabelSet>, cfg: &TrainConfig) -> Result<TrainedModel> {
    validate(ds, labels, cfg)?;
    let model = &cfg.model;
    let n = ds.len();
    let k = model.latent_dim;
    let mut params = init_params(model, cfg.seed)?;
    let mut adam = AdamState::for_params(&params, AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::new();
    let mut step = 0usize;
    let mut epoch_means = Vec::with_capacity(cfg.epochs);
    let mut last: Option<LossBreakdown> = None;
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_total = 0.0;
        let mut epoch_steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let x = ds.images.select_rows(chunk);
            let ys = labels.map(|l| l.select_rows(chunk));
            let eps_data = (0..chunk.len() * k).map(|_| rng.sample(StandardNormal)).collect();
            let eps = Tensor::new(&[chunk.len(), k], eps_data)?;
            let batch = Batch {
                x: &x,
                y: ys.as_deref(),
                eps: &eps,
            };
            let loss = wela_loss_and_grad(&mut params, model, batch, n)?;
            if let Some(term) = loss.non_finite_term() {
                return Err(Error::Diverged { epoch, step, term });
            }
            if !params.grads_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    term: "gradient".into(),
                });
            }
            adam_step(&mut params, &mut adam)?;
            epoch_total += loss.total;
            epoch_steps += 1;
            log.push(LogRow::new(epoch, step, &loss));
            last = Some(loss);
        }
        let mean = epoch_total / epoch_steps as f64;
        ::log::debug!("seed {} epoch {epoch}: mean loss {mean:.3}", cfg.seed);
        epoch_means.push(mean);
    }
    let final_loss = last.expect("at least one step");
    let loss_summary = LossHistorySummary {
        steps: step,
        first_epoch_mean_total: epoch_means[0],
        last_epoch_mean_total: *epoch_means.last().expect("epochs >= 1"),
        final_total: final_loss.total,
    };
    Ok(TrainedModel {
        params,
        log,
        final_loss,
        loss_summary,
    })
}

/// Trains and writes the checkpoint, the per-step log and `run.json` into `out_dir`.
pub fn train(
    ds: &BlobDataset,
    labels: Option<&WeakLabelSet>,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<RunResult> {
    let start = Instant::now();
    let trained = fit(ds, labels, cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let meta = CheckpointMeta {
        config: cfg.model.clone(),
        seed: cfg.seed,
        epoch: cfg.epochs,
        loss: trained.loss_summary.clone(),
    };
    let checkpoint_sha256 = save_checkpoint(out_dir, &trained.params, &meta)?;
    let log_path = out_dir.join(LOG_FILE);
    write_log_csv(&log_path, &trained.log)?;
    let label_accuracy = match labels {
        Some(l) => label_accuracy(&trained.params, ds, l, &cfg.model)?,
        None => Vec::new(),
    };
    let result = RunResult {
        config: cfg.clone(),
        checkpoint_dir: out_dir.to_path_buf(),
        checkpoint_sha256,
        log_path,
        final_loss: trained.final_loss,
        label_accuracy,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        threads: 1,
        dataset_path: None,
        dataset_hash: ds.content_hash.clone(),
    };
    write_run(out_dir, &result)?;
    Ok(result)
}

pub fn write_run(dir: &Path, result: &RunResult) -> Result<()> {
    std::fs::write(dir.join(RUN_FILE), serde_json::to_string_pretty(result)?)?;
    Ok(())
}

pub fn read_run(dir: &Path) -> Result<RunResult> {
    Ok(serde_json::from_slice(&std::fs::read(dir.join(RUN_FILE))?)?)
}

/// Posterior means (ε = 0) for every sample, computed in chunks.
pub fn mean_codes(
    params: &ParamStore<f32>,
    cfg: &ModelConfig,
    ds: &BlobDataset,
    labels: Option<&WeakLabelSet>,
) -> Result<LatentCode<f32>> {
    if cfg.is_labeled() != labels.is_some() {
        return Err(Error::Config("labels must be given iff the model is labeled".into()));
    }
    let n = ds.len();
    let k = cfg.latent_dim;
    let mut mu = Vec::with_capacity(n * k);
    let mut logvar = Vec::with_capacity(n * k);
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let x = ds.images.select_rows(chunk);
        let ys = labels.map(|l| l.select_rows(chunk));
        let code = encode(params, cfg, &x, ys.as_deref())?;
        mu.extend_from_slice(code.mu.data());
        logvar.extend_from_slice(code.logvar.data());
    }
    Ok(LatentCode {
        mu: Tensor::new(&[n, k], mu)?,
        logvar: Tensor::new(&[n, k], logvar)?,
    })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-label fraction of samples whose decoded label (from z = μ) matches.
pub fn label_accuracy(
    params: &ParamStore<f32>,
    ds: &BlobDataset,
    labels: &WeakLabelSet,
    cfg: &ModelConfig,
) -> Result<Vec<f64>> {
    if !cfg.is_labeled() {
        return Ok(Vec::new());
    }
    let n = ds.len();
    let classes: Vec<Vec<usize>> = (0..labels.onehots.len()).map(|j| labels.classes(j)).collect();
    let mut hits = vec![0usize; classes.len()];
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let x = ds.images.select_rows(chunk);
        let ys = labels.select_rows(chunk);
        let code = encode(params, cfg, &x, Some(&ys))?;
        let out = decode(params, cfg, &code.mu)?;
        for (j, logits) in out.label_logits.iter().enumerate() {
            for (r, &sample) in chunk.iter().enumerate() {
                if argmax(logits.row(r)) == classes[j][sample] {
                    hits[j] += 1;
                }
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
