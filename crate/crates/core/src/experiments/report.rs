use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::{model_id, Family, FailedRun, FAILED_FILE};
use crate::dataset::{load_dataset, Factor, StoredDataset};
use crate::error::{Error, Result};
use crate::evaluation::{mse_for, represent, MetricRanges, Task};
use crate::model::load_checkpoint;
use crate::trainer::{read_run, RunResult, TrainConfig, RUN_FILE};

/// Which coordinate ranges the rescaled channels are mapped onto.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeMode {
    /// The span of the dataset's own coordinates.
    #[default]
    Extent,
    /// The fixed constants for the 64-pixel canvas.
    Published,
}

impl RangeMode {
    pub fn ranges(self, side: usize) -> MetricRanges {
        match self {
            RangeMode::Extent => MetricRanges::for_side(side),
            RangeMode::Published => MetricRanges::published(),
        }
    }
}

impl FromStr for RangeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extent" => Ok(RangeMode::Extent),
            "published" => Ok(RangeMode::Published),
            other => Err(Error::Parameter(format!(
                "unknown range mode `{other}` (expected extent or published)"
            ))),
        }
    }
}

impl fmt::Display for RangeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RangeMode::Extent => "extent",
            RangeMode::Published => "published",
        })
    }
}

/// A run directory found on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum RunEntry {
    Done { dir: PathBuf, run: RunResult },
    Failed { dir: PathBuf, failed: FailedRun },
}

impl RunEntry {
    pub fn config(&self) -> &TrainConfig {
        match self {
            RunEntry::Done { run, .. } => &run.config,
            RunEntry::Failed { failed, .. } => &failed.config,
        }
    }

    pub fn dir(&self) -> &Path {
        match self {
            RunEntry::Done { dir, .. } | RunEntry::Failed { dir, .. } => dir,
        }
    }
}

fn scan(dir: &Path, out: &mut Vec<RunEntry>) -> Result<()> {
    if dir.join(RUN_FILE).is_file() {
        out.push(RunEntry::Done {
            dir: dir.to_path_buf(),
            run: read_run(dir)?,
        });
        return Ok(());
    }
    if dir.join(FAILED_FILE).is_file() {
        let failed = serde_json::from_slice(&std::fs::read(dir.join(FAILED_FILE))?)?;
        out.push(RunEntry::Failed {
            dir: dir.to_path_buf(),
            failed,
        });
        return Ok(());
    }
    let mut children: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    for child in children {
        scan(&child, out)?;
    }
    Ok(())
}

/// Every run directory below `root`, in path order.
pub fn collect_runs(root: &Path) -> Result<Vec<RunEntry>> {
    let mut out = Vec::new();
    if root.is_dir() {
        scan(root, &mut out)?;
    }
    Ok(out)
}

/// One row of the per-seed metrics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetric {
    pub model_id: String,
    pub family: Family,
    pub p: Option<usize>,
    pub latent_dim: usize,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub task: Task,
    pub ok: bool,
    pub mse: Option<f64>,
    pub channel_i: Option<usize>,
    pub channel_j: Option<usize>,
    pub invert_i: Option<bool>,
    pub invert_j: Option<bool>,
    pub acc_angle: Option<f64>,
    pub acc_distance: Option<f64>,
}

impl SeedMetric {
    fn skeleton(cfg: &TrainConfig, task: Task) -> Self {
        let model = &cfg.model;
        let (family, p, gamma) = if model.is_labeled() {
            (Family::Wela, model.label_dims.first().copied(), Some(model.gamma))
        } else {
            (Family::Tcvae, None, None)
        };
        Self {
            model_id: model_id(family, p),
            family,
            p,
            latent_dim: model.latent_dim,
            beta: model.beta,
            gamma,
            seed: cfg.seed,
            task,
            ok: false,
            mse: None,
            channel_i: None,
            channel_j: None,
            invert_i: None,
            invert_j: None,
            acc_angle: None,
            acc_distance: None,
        }
    }
}

/// Scores one trained run against the dataset it was trained on.
pub fn evaluate_run(run: &RunResult, stored: &StoredDataset, task: Task, mode: RangeMode) -> Result<SeedMetric> {
    let ds = &stored.dataset;
    if run.dataset_hash != ds.content_hash {
        return Err(Error::Config(format!(
            "run in {} was trained on dataset {} but {} was supplied",
            run.checkpoint_dir.display(),
            run.dataset_hash,
            ds.content_hash
        )));
    }
    let ckpt = load_checkpoint(&run.checkpoint_dir)?;
    let model = &ckpt.meta.config;
    let labels = if model.is_labeled() {
        let p = model.label_dims[0];
        Some(stored.labels_for(p).ok_or_else(|| Error::Config(format!("dataset has no labels for p={p}")))?)
    } else {
        None
    };
    let rep = represent(&ckpt.params, ds, labels, model)?;
    let result = mse_for(task, &rep, mode.ranges(ds.side()))?;
    let mut m = SeedMetric::skeleton(&run.config, task);
    m.ok = true;
    m.mse = Some(result.mse);
    m.channel_i = Some(result.channel_assignment.0);
    m.channel_j = Some(result.channel_assignment.1);
    m.invert_i = Some(result.inversion_flags.0);
    m.invert_j = Some(result.inversion_flags.1);
    if let Some(l) = labels {
        for (factor, acc) in l.factors().iter().zip(&run.label_accuracy) {
            match factor {
                Factor::Angle => m.acc_angle = Some(*acc),
                Factor::Distance => m.acc_distance = Some(*acc),
            }
        }
    }
    Ok(m)
}

/// Scores every entry; failed runs yield `ok = false` rows. Datasets are
/// loaded once per path.
pub fn evaluate_runs(entries: &[RunEntry], task: Task, mode: RangeMode) -> Result<Vec<SeedMetric>> {
    let mut datasets: BTreeMap<PathBuf, StoredDataset> = BTreeMap::new();
    for entry in entries {
        if let RunEntry::Done { run, dir } = entry {
            let path = run.dataset_path.clone().ok_or_else(|| {
                Error::Config(format!("run in {} does not record its dataset", dir.display()))
            })?;
            if !datasets.contains_key(&path) {
                let stored = load_dataset(&path)?;
                datasets.insert(path, stored);
            }
        }
    }
    let mut metrics: Vec<SeedMetric> = entries
        .par_iter()
        .map(|entry| match entry {
            RunEntry::Done { run, .. } => {
                let path = run.dataset_path.as_ref().expect("checked above");
                evaluate_run(run, &datasets[path], task, mode)
            }
            RunEntry::Failed { failed, .. } => Ok(SeedMetric::skeleton(&failed.config, task)),
        })
        .collect::<Result<_>>()?;
    metrics.sort_by(|a, b| {
        (a.family, a.p, a.latent_dim, a.seed)
            .cmp(&(b.family, b.p, b.latent_dim, b.seed))
            .then(a.beta.total_cmp(&b.beta))
            .then(a.gamma.unwrap_or(0.0).total_cmp(&b.gamma.unwrap_or(0.0)))
    });
    Ok(metrics)
}

pub fn write_metrics_csv(path: &Path, metrics: &[SeedMetric]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<SeedMetric>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Lowest, mean and mean of the best ⌈0.1·S⌉ of `scores`.
pub fn score_stats(scores: &[f64]) -> Option<(f64, f64, f64)> {
    if scores.is_empty() {
        return None;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s = sorted.len();
    let top = s.div_ceil(10);
    let mean = sorted.iter().sum::<f64>() / s as f64;
    let best = sorted[..top].iter().sum::<f64>() / top as f64;
    Some((sorted[0], mean, best))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: Family,
    pub p: Option<usize>,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
    pub acc_angle: Option<f64>,
    pub acc_distance: Option<f64>,
    pub mse_lowest: Option<f64>,
    pub mse_mean: Option<f64>,
    pub mse_best10: Option<f64>,
}

impl ReportRow {
    pub fn model_id(&self) -> String {
        model_id(self.family, self.p)
    }

    pub fn available(&self) -> bool {
        self.seeds_ok > 0
    }
}

/// Aggregates per-seed metrics into one row per model configuration.
/// Rows without a successful seed keep empty statistics.
pub fn build_report(metrics: &[SeedMetric]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(Family, Option<usize>, usize, u64, u64), Vec<&SeedMetric>> = BTreeMap::new();
    for m in metrics {
        let key = (
            m.family,
            m.p,
            m.latent_dim,
            m.beta.to_bits(),
            m.gamma.unwrap_or(0.0).to_bits(),
        );
        groups.entry(key).or_default().push(m);
    }
    groups
        .into_values()
        .map(|rows| {
            let first = rows[0];
            let ok: Vec<&SeedMetric> = rows.iter().copied().filter(|m| m.ok && m.mse.is_some()).collect();
            let scores: Vec<f64> = ok.iter().filter_map(|m| m.mse).collect();
            let stats = score_stats(&scores);
            let best = ok
                .iter()
                .min_by(|a, b| a.mse.unwrap().total_cmp(&b.mse.unwrap()).then(a.seed.cmp(&b.seed)));
            ReportRow {
                family: first.family,
                p: first.p,
                beta: first.beta,
                gamma: first.gamma,
                seeds_ok: ok.len(),
                seeds_failed: rows.len() - ok.len(),
                acc_angle: best.and_then(|m| m.acc_angle),
                acc_distance: best.and_then(|m| m.acc_distance),
                mse_lowest: stats.map(|s| s.0),
                mse_mean: stats.map(|s| s.1),
                mse_best10: stats.map(|s| s.2),
            }
        })
        .collect()
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.decimals$}"))
}

/// Aligned text table, one line per model.
pub fn format_report_table(rows: &[ReportRow], task: Task) -> String {
    let header = [
        "Model", "p", "beta", "gamma", "Acc(angle)", "Acc(dist)", "Lowest", "Mean", "Best 10%", "Seeds", "Failed",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.family.name().to_string(),
                r.p.map_or_else(|| "-".into(), |p| p.to_string()),
                format!("{}", r.beta),
                r.gamma.map_or_else(|| "-".into(), |g| format!("{g}")),
                opt(r.acc_angle, 2),
                opt(r.acc_distance, 2),
                if r.available() { opt(r.mse_lowest, 2) } else { "unavailable".into() },
                opt(r.mse_mean, 2),
                opt(r.mse_best10, 2),
                r.seeds_ok.to_string(),
                r.seeds_failed.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = format!("{task} coordinate recovery MSE\n");
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(rule.iter().map(String::as_str).collect(), &mut out);
    for row in &body {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// Files written by [`report_runs`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub metrics_csv: PathBuf,
    pub report_csv: PathBuf,
    pub report_txt: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path, task: Task) -> Self {
        Self {
            metrics_csv: dir.join(format!("metrics_{task}.csv")),
            report_csv: dir.join(format!("report_{task}.csv")),
            report_txt: dir.join(format!("report_{task}.txt")),
        }
    }
}

/// Scores every run below `runs_root` and writes the per-seed metrics,
/// the report CSV and the text table into `out_dir`.
pub fn report_runs(
    runs_root: &Path,
    task: Task,
    mode: RangeMode,
    out_dir: &Path,
) -> Result<(Vec<ReportRow>, ReportFiles)> {
    let entries = collect_runs(runs_root)?;
    if entries.is_empty() {
        return Err(Error::Config(format!("no runs found in {}", runs_root.display())));
    }
    let metrics = evaluate_runs(&entries, task, mode)?;
    let rows = build_report(&metrics);
    std::fs::create_dir_all(out_dir)?;
    let files = ReportFiles::in_dir(out_dir, task);
    write_metrics_csv(&files.metrics_csv, &metrics)?;
    write_report_csv(&files.report_csv, &rows)?;
    std::fs::write(&files.report_txt, format_report_table(&rows, task))?;
    Ok((rows, files))
}
