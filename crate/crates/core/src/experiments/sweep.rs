use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_dataset, StoredDataset};
use crate::error::{Error, Result};
use crate::model::{verify_checkpoint, ModelConfig};
use crate::trainer::{read_run, train, write_run, RunResult, TrainConfig, RUN_FILE};

pub const FAILED_FILE: &str = "failed.json";
pub const DEFAULT_BETA: f64 = 40.0;
pub const TCVAE_LATENT_DIM: usize = 5;

/// γ per label dimensionality used for the published WeLa-VAE rows.
pub const PUBLISHED_GAMMAS: [(usize, f64); 7] = [
    (2, 2000.0),
    (3, 1500.0),
    (4, 1000.0),
    (5, 800.0),
    (6, 750.0),
    (7, 600.0),
    (8, 500.0),
];

pub fn published_gammas() -> BTreeMap<usize, f64> {
    PUBLISHED_GAMMAS.into_iter().collect()
}

/// True when `γ·2p` is within a factor of two of the image dimension.
pub fn gamma_rule_holds(gamma: f64, p: usize, dim: usize) -> bool {
    let ratio = gamma * 2.0 * p as f64 / dim as f64;
    (0.5..=2.0).contains(&ratio)
}

/// Logs a warning for each `(p, γ)` pair that breaks [`gamma_rule_holds`];
/// returns the offending label dimensionalities.
pub fn check_gamma_rule(gammas: &BTreeMap<usize, f64>, dim: usize) -> Vec<usize> {
    let mut bad = Vec::new();
    for (&p, &gamma) in gammas {
        if !gamma_rule_holds(gamma, p, dim) {
            log::warn!(
                "gamma {gamma} for p={p} gives gamma*2p = {} which is not within 2x of D={dim}",
                gamma * 2.0 * p as f64
            );
            bad.push(p);
        }
    }
    bad
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Tcvae,
    Wela,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Tcvae => "tcvae",
            Family::Wela => "wela",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tcvae" => Ok(Family::Tcvae),
            "wela" => Ok(Family::Wela),
            other => Err(Error::Parameter(format!("unknown model family `{other}`"))),
        }
    }
}

/// Model row identifier: `tcvae` or `wela-p{p}`.
pub fn model_id(family: Family, p: Option<usize>) -> String {
    match (family, p) {
        (Family::Wela, Some(p)) => format!("wela-p{p}"),
        (family, _) => family.name().to_string(),
    }
}

/// Hyperparameters shared by every run of a sweep, apart from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainTemplate {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub shuffle: bool,
}

impl Default for TrainTemplate {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 256,
            epochs: 150,
            hidden: ModelConfig::HIDDEN,
            shuffle: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dataset: PathBuf,
    pub family: Family,
    pub beta: f64,
    /// γ keyed by p; only read for the WeLa family.
    pub gammas: BTreeMap<usize, f64>,
    pub ps: Vec<usize>,
    /// Latent width of the TCVAE family; WeLa always uses K = m.
    pub tcvae_latent_dim: usize,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub train: TrainTemplate,
}

impl SweepConfig {
    pub fn new(dataset: impl Into<PathBuf>, family: Family, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            family,
            beta: DEFAULT_BETA,
            gammas: published_gammas(),
            ps: (2..=8).collect(),
            tcvae_latent_dim: TCVAE_LATENT_DIM,
            seeds: (0..50).collect(),
            workers: 1,
            out_dir: out_dir.into(),
            train: TrainTemplate::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.family == Family::Wela {
            if self.ps.is_empty() {
                return Err(Error::Config("wela sweep needs at least one p".into()));
            }
            for p in &self.ps {
                if !self.gammas.contains_key(p) {
                    return Err(Error::Config(format!("no gamma given for p={p}")));
                }
            }
        }
        Ok(())
    }

    /// One job per (model, seed), in model-then-seed order.
    pub fn jobs(&self, dim: usize) -> Vec<RunSpec> {
        let models: Vec<(Option<usize>, Option<f64>, ModelConfig)> = match self.family {
            Family::Tcvae => vec![(
                None,
                None,
                ModelConfig::tcvae(dim, self.tcvae_latent_dim, self.beta),
            )],
            Family::Wela => self
                .ps
                .iter()
                .map(|&p| {
                    let g = self.gammas[&p];
                    (Some(p), Some(g), ModelConfig::wela(dim, p, 2, g, self.beta))
                })
                .collect(),
        };
        let mut jobs = Vec::new();
        for (p, gamma, model) in models {
            let model = model.with_hidden(self.train.hidden);
            for &seed in &self.seeds {
                let train = TrainConfig {
                    model: model.clone(),
                    learning_rate: self.train.learning_rate,
                    batch_size: self.train.batch_size,
                    epochs: self.train.epochs,
                    seed,
                    shuffle: self.train.shuffle,
                };
                jobs.push(RunSpec {
                    family: self.family,
                    p,
                    gamma,
                    beta: self.beta,
                    train,
                });
            }
        }
        jobs
    }
}

/// One training job of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub family: Family,
    pub p: Option<usize>,
    pub gamma: Option<f64>,
    pub beta: f64,
    pub train: TrainConfig,
}

impl RunSpec {
    pub fn model_id(&self) -> String {
        model_id(self.family, self.p)
    }

    /// Hash of everything but the seed, plus the dataset content.
    pub fn config_hash(&self, dataset_hash: &str) -> String {
        let mut cfg = self.train.clone();
        cfg.seed = 0;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&cfg).expect("train config serializes"));
        h.update(dataset_hash.as_bytes());
        hex::encode(h.finalize())
    }

    /// `{root}/{model id}-{config hash prefix}/seed-{seed}`.
    pub fn run_dir(&self, root: &Path, dataset_hash: &str) -> PathBuf {
        let hash = self.config_hash(dataset_hash);
        root.join(format!("{}-{}", self.model_id(), &hash[..12]))
            .join(format!("seed-{}", self.train.seed))
    }
}

/// Record left in a run directory when training aborted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub config: TrainConfig,
    pub error: String,
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub dataset_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Trained(RunResult),
    /// Found complete on disk with a verified checkpoint.
    Resumed(RunResult),
    Failed(FailedRun),
}

impl RunStatus {
    pub fn result(&self) -> Option<&RunResult> {
        match self {
            RunStatus::Trained(r) | RunStatus::Resumed(r) => Some(r),
            RunStatus::Failed(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub dir: PathBuf,
    pub status: RunStatus,
}

/// A completed run whose `run.json` matches `cfg` and whose checkpoint hash verifies.
pub fn completed_run(dir: &Path, cfg: &TrainConfig) -> Option<RunResult> {
    let run = read_run(dir).ok()?;
    if &run.config != cfg {
        return None;
    }
    match verify_checkpoint(dir) {
        Some(sha) if sha == run.checkpoint_sha256 => Some(run),
        _ => None,
    }
}

fn previous_failure(dir: &Path, cfg: &TrainConfig) -> Option<FailedRun> {
    let failed: FailedRun = serde_json::from_slice(&std::fs::read(dir.join(FAILED_FILE)).ok()?).ok()?;
    (&failed.config == cfg).then_some(failed)
}

fn execute(spec: &RunSpec, stored: &StoredDataset, dataset_path: &Path, root: &Path) -> Result<RunRecord> {
    let ds = &stored.dataset;
    let dir = spec.run_dir(root, &ds.content_hash);
    if let Some(run) = completed_run(&dir, &spec.train) {
        log::info!("{} seed {}: complete, skipped", spec.model_id(), spec.train.seed);
        return Ok(RunRecord {
            spec: spec.clone(),
            dir,
            status: RunStatus::Resumed(run),
        });
    }
    if let Some(failed) = previous_failure(&dir, &spec.train) {
        return Ok(RunRecord {
            spec: spec.clone(),
            dir,
            status: RunStatus::Failed(failed),
        });
    }
    let labels = match spec.p {
        Some(p) => Some(stored.labels_for(p).ok_or_else(|| {
            Error::Config(format!("dataset at {} has no labels for p={p}", dataset_path.display()))
        })?),
        None => None,
    };
    match train(ds, labels, &spec.train, &dir) {
        Ok(mut run) => {
            run.dataset_path = Some(dataset_path.to_path_buf());
            write_run(&dir, &run)?;
            let _ = std::fs::remove_file(dir.join(FAILED_FILE));
            log::info!(
                "{} seed {}: loss {:.3} in {:.1}s",
                spec.model_id(),
                spec.train.seed,
                run.final_loss.total,
                run.wall_seconds
            );
            Ok(RunRecord {
                spec: spec.clone(),
                dir,
                status: RunStatus::Trained(run),
            })
        }
        Err(e @ Error::Diverged { .. }) => {
            log::warn!("{} seed {}: {e}", spec.model_id(), spec.train.seed);
            let failed = FailedRun {
                config: spec.train.clone(),
                error: e.to_string(),
                dataset_path: Some(dataset_path.to_path_buf()),
                dataset_hash: ds.content_hash.clone(),
            };
            std::fs::create_dir_all(&dir)?;
            let _ = std::fs::remove_file(dir.join(RUN_FILE));
            std::fs::write(dir.join(FAILED_FILE), serde_json::to_string_pretty(&failed)?)?;
            Ok(RunRecord {
                spec: spec.clone(),
                dir,
                status: RunStatus::Failed(failed),
            })
        }
        Err(e) => Err(e),
    }
}

/// Trains every (model, seed) job of the sweep on a pool of `workers` threads.
/// Runs already complete on disk are skipped; diverged runs are recorded
/// and the sweep continues. Records come back in job order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let stored = load_dataset(&cfg.dataset)?;
    let dim = stored.dataset.dim();
    if cfg.family == Family::Wela {
        let used: BTreeMap<usize, f64> = cfg.ps.iter().map(|p| (*p, cfg.gammas[p])).collect();
        check_gamma_rule(&used, dim);
        for p in &cfg.ps {
            if stored.labels_for(*p).is_none() {
                return Err(Error::Config(format!(
                    "dataset at {} has no labels for p={p}",
                    cfg.dataset.display()
                )));
            }
        }
    }
    let jobs = cfg.jobs(dim);
    let root = cfg.out_dir.join("runs");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|spec| execute(spec, &stored, &cfg.dataset, &root))
            .collect()
    })
}
