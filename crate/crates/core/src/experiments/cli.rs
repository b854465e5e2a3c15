//! Command-line front end. Every subcommand's options may also come from a
//! TOML file given with `--config`; flags win over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use super::report::{evaluate_run, report_runs, write_metrics_csv, RangeMode};
use super::sweep::{
    check_gamma_rule, model_id, published_gammas, run_sweep, Family, RunStatus, SweepConfig,
    TrainTemplate, DEFAULT_BETA, TCVAE_LATENT_DIM,
};
use crate::dataset::{
    build_weak_labels, generate_dataset, load_dataset, save_dataset, GenerateConfig, StoredDataset,
    WeakLabelConfig, CANONICAL_SIDE, CANONICAL_SIGMA_MAX, CANONICAL_SIGMA_MIN, CANONICAL_VARIANTS,
};
use crate::error::{Error, Result};
use crate::evaluation::{heatmap, traversal_panel, traverse, write_heatmaps, write_traversal, Task};
use crate::model::{load_checkpoint, ModelConfig};
use crate::trainer::{read_run, train, write_run, RunResult, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Integer list written as `2,3,5`, `2..8` (inclusive) or a mix of both.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(from = "Vec<u64>")]
pub struct IntList(pub Vec<u64>);

impl From<Vec<u64>> for IntList {
    fn from(v: Vec<u64>) -> Self {
        IntList(v)
    }
}

impl FromStr for IntList {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
                if b < a {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            } else {
                out.push(part.parse().map_err(|_| format!("bad integer `{part}`"))?);
            }
        }
        if out.is_empty() {
            return Err("empty list".into());
        }
        Ok(IntList(out))
    }
}

impl IntList {
    fn usizes(&self) -> Vec<usize> {
        self.0.iter().map(|&v| v as usize).collect()
    }
}

/// `p:γ` pairs such as `2:2000,3:1500`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(from = "BTreeMap<String, f64>")]
pub struct GammaMap(pub BTreeMap<usize, f64>);

impl From<BTreeMap<String, f64>> for GammaMap {
    fn from(m: BTreeMap<String, f64>) -> Self {
        GammaMap(m.into_iter().filter_map(|(k, v)| Some((k.parse().ok()?, v))).collect())
    }
}

impl FromStr for GammaMap {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (p, g) = part.split_once(':').ok_or_else(|| format!("expected p:gamma, got `{part}`"))?;
            let p: usize = p.trim().parse().map_err(|_| format!("bad p in `{part}`"))?;
            let g: f64 = g.trim().parse().map_err(|_| format!("bad gamma in `{part}`"))?;
            out.insert(p, g);
        }
        Ok(GammaMap(out))
    }
}

macro_rules! merge {
    ($a:ident, $b:ident; $($f:ident),*) => {
        Self { $($f: $a.$f.or($b.$f)),* }
    };
}

#[derive(Parser, Debug)]
#[command(name = "wela", version, about = "Weakly-supervised disentanglement on the Blobs dataset")]
pub struct Cli {
    /// Seed for `train` and dataset generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with defaults for any option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dataset management.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train one model.
    Train(TrainArgs),
    /// Train many models and seeds.
    Sweep(SweepArgs),
    /// Score one trained run.
    Eval(EvalArgs),
    /// Decode latent traversals.
    Traverse(TraverseArgs),
    /// Positional heat maps of the mean code.
    Heatmap(RunArgs),
    /// Aggregate scored runs into a table.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
pub enum DatasetCommand {
    /// Render the images and weak labels and write them to disk.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateArgs {
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub variants: Option<usize>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Label dimensionalities to emit, e.g. `2..8`.
    #[arg(long)]
    pub p: Option<IntList>,
}

impl GenerateArgs {
    fn or(self, o: Self) -> Self {
        merge!(self, o; side, variants, sigma_min, sigma_max, p)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Latent width (TCVAE only).
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
}

impl TrainArgs {
    fn or(self, o: Self) -> Self {
        merge!(self, o; data, family, p, gamma, beta, latent_dim, lr, batch_size, epochs, hidden)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub p: Option<IntList>,
    /// `p:γ` pairs; defaults to the published values.
    #[arg(long)]
    pub gammas: Option<GammaMap>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Seeds, e.g. `0..49`.
    #[arg(long)]
    pub seeds: Option<IntList>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
}

impl SweepArgs {
    fn or(self, o: Self) -> Self {
        merge!(self, o; data, family, p, gammas, beta, latent_dim, seeds, lr, batch_size, epochs, hidden)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    /// Run directory holding `run.json` and the checkpoint.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// `cartesian`, `polar` or omitted for both.
    #[arg(long)]
    pub task: Option<Task>,
    /// `extent` (default) or `published`.
    #[arg(long)]
    pub ranges: Option<RangeMode>,
    /// Dataset directory, if the run does not record one.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

impl EvalArgs {
    fn or(self, o: Self) -> Self {
        merge!(self, o; run, task, ranges, data)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraverseArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub min: Option<f64>,
    #[arg(long)]
    pub max: Option<f64>,
    /// Base sample indices; defaults to a fixed panel of positions.
    #[arg(long)]
    pub samples: Option<IntList>,
    #[arg(long)]
    pub data: Option<PathBuf>,
}

impl TraverseArgs {
    fn or(self, o: Self) -> Self {
        merge!(self, o; run, steps, min, max, samples, data)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
}

impl RunArgs {
    fn or(self, o: Self) -> Self {
        merge!(self, o; run, data)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportArgs {
    #[arg(long)]
    pub task: Option<Task>,
    /// Directory searched for runs.
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub ranges: Option<RangeMode>,
}

impl ReportArgs {
    fn or(self, o: Self) -> Self {
        merge!(self, o; task, input, ranges)
    }
}

/// Layout of the `--config` file: global keys plus one optional table per subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub dataset: GenerateArgs,
    pub train: TrainArgs,
    pub sweep: SweepArgs,
    pub eval: EvalArgs,
    pub traverse: TraverseArgs,
    pub heatmap: RunArgs,
    pub report: ReportArgs,
}

pub fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

struct Globals {
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: usize,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required option --{flag}")))
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => read_file_config(path)?,
        None => FileConfig::default(),
    };
    let g = Globals {
        seed: cli.seed.or(file.seed),
        out: cli.out.or(file.out),
        threads: cli.threads.or(file.threads).unwrap_or(1),
    };
    if g.threads == 0 {
        return Err(Error::Config("--threads must be >= 1".into()));
    }
    match cli.command {
        Command::Dataset(DatasetCommand::Generate(a)) => cmd_generate(a.or(file.dataset), &g),
        Command::Train(a) => cmd_train(a.or(file.train), &g),
        Command::Sweep(a) => cmd_sweep(a.or(file.sweep), &g),
        Command::Eval(a) => cmd_eval(a.or(file.eval), &g),
        Command::Traverse(a) => cmd_traverse(a.or(file.traverse), &g),
        Command::Heatmap(a) => cmd_heatmap(a.or(file.heatmap), &g),
        Command::Report(a) => cmd_report(a.or(file.report), &g),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn cmd_generate(a: GenerateArgs, g: &Globals) -> Result<()> {
    let side = a.side.unwrap_or(CANONICAL_SIDE);
    let cfg = GenerateConfig {
        side,
        variants: a.variants.unwrap_or(CANONICAL_VARIANTS),
        sigma_min: a.sigma_min.unwrap_or(CANONICAL_SIGMA_MIN),
        sigma_max: a.sigma_max.unwrap_or(CANONICAL_SIGMA_MAX),
        seed: g.seed.unwrap_or(0),
    };
    let ps = a.p.map_or_else(|| (2..=8).collect(), |l| l.usizes());
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from(format!("data/blobs-{side}")));
    let manifest = pool(g.threads)?.install(|| -> Result<_> {
        let ds = generate_dataset(&cfg)?;
        let labels = ps
            .iter()
            .map(|&p| build_weak_labels(&ds, &WeakLabelConfig::new(p, side)))
            .collect::<Result<Vec<_>>>()?;
        save_dataset(&out, &ds, &labels)
    })?;
    println!(
        "wrote {} samples (D={}) with labels for p={:?} to {}\ncontent hash {}",
        manifest.samples,
        manifest.dim,
        ps,
        out.display(),
        manifest.content_hash
    );
    Ok(())
}

/// Model and training configuration described by `train` options.
pub fn train_config(a: &TrainArgs, dim: usize, seed: u64) -> Result<(TrainConfig, Option<usize>)> {
    let family = a.family.unwrap_or(Family::Wela);
    let beta = a.beta.unwrap_or(DEFAULT_BETA);
    let hidden = a.hidden.unwrap_or(ModelConfig::HIDDEN);
    let (model, p) = match family {
        Family::Tcvae => {
            if a.p.is_some() || a.gamma.is_some() {
                return Err(Error::Config("--p and --gamma only apply to the wela family".into()));
            }
            (ModelConfig::tcvae(dim, a.latent_dim.unwrap_or(TCVAE_LATENT_DIM), beta), None)
        }
        Family::Wela => {
            let p = required(a.p, "p")?;
            let gamma = match a.gamma {
                Some(g) => g,
                None => *published_gammas()
                    .get(&p)
                    .ok_or_else(|| Error::Config(format!("no default gamma for p={p}; pass --gamma")))?,
            };
            check_gamma_rule(&BTreeMap::from([(p, gamma)]), dim);
            (ModelConfig::wela(dim, p, 2, gamma, beta), Some(p))
        }
    };
    let mut cfg = TrainConfig::new(model.with_hidden(hidden), seed);
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    Ok((cfg, p))
}

fn labels_for(stored: &StoredDataset, p: Option<usize>) -> Result<Option<&crate::dataset::WeakLabelSet>> {
    match p {
        None => Ok(None),
        Some(p) => stored
            .labels_for(p)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("dataset has no labels for p={p}"))),
    }
}

fn cmd_train(a: TrainArgs, g: &Globals) -> Result<()> {
    let data = required(a.data.clone(), "data")?;
    let stored = load_dataset(&data)?;
    let seed = g.seed.unwrap_or(0);
    let (cfg, p) = train_config(&a, stored.dataset.dim(), seed)?;
    let labels = labels_for(&stored, p)?;
    let id = model_id(a.family.unwrap_or(Family::Wela), p);
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{id}/seed-{seed}")));
    let mut run = train(&stored.dataset, labels, &cfg, &out)?;
    run.dataset_path = Some(data);
    write_run(&out, &run)?;
    println!(
        "{id} seed {seed}: final loss {:.4}, label accuracy {:?}, {:.1}s\nrun written to {}",
        run.final_loss.total,
        run.label_accuracy,
        run.wall_seconds,
        out.display()
    );
    Ok(())
}

fn cmd_sweep(a: SweepArgs, g: &Globals) -> Result<()> {
    let data = required(a.data, "data")?;
    let family = a.family.unwrap_or(Family::Wela);
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    let mut cfg = SweepConfig::new(data, family, out);
    if let Some(p) = a.p {
        cfg.ps = p.usizes();
    }
    if let Some(gm) = a.gammas {
        cfg.gammas.extend(gm.0);
    }
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if let Some(k) = a.latent_dim {
        cfg.tcvae_latent_dim = k;
    }
    if let Some(s) = a.seeds {
        cfg.seeds = s.0;
    }
    cfg.workers = g.threads;
    let d = TrainTemplate::default();
    cfg.train = TrainTemplate {
        learning_rate: a.lr.unwrap_or(d.learning_rate),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        epochs: a.epochs.unwrap_or(d.epochs),
        hidden: a.hidden.unwrap_or(d.hidden),
        shuffle: true,
    };
    let records = run_sweep(&cfg)?;
    let (mut trained, mut resumed, mut failed) = (0, 0, 0);
    for r in &records {
        match r.status {
            RunStatus::Trained(_) => trained += 1,
            RunStatus::Resumed(_) => resumed += 1,
            RunStatus::Failed(_) => failed += 1,
        }
    }
    println!(
        "{} runs: {trained} trained, {resumed} already complete, {failed} failed\nruns under {}",
        records.len(),
        cfg.out_dir.join("runs").display()
    );
    Ok(())
}

fn load_run(run_dir: &Path, data: Option<PathBuf>) -> Result<(RunResult, StoredDataset)> {
    let mut run = read_run(run_dir)?;
    run.checkpoint_dir = run_dir.to_path_buf();
    let path = data
        .or_else(|| run.dataset_path.clone())
        .ok_or_else(|| Error::Config("run does not record its dataset; pass --data".into()))?;
    let stored = load_dataset(&path)?;
    run.dataset_path = Some(path);
    Ok((run, stored))
}

fn cmd_eval(a: EvalArgs, g: &Globals) -> Result<()> {
    let run_dir = required(a.run, "run")?;
    let (run, stored) = load_run(&run_dir, a.data)?;
    let tasks = match a.task {
        Some(t) => vec![t],
        None => vec![Task::Cartesian, Task::Polar],
    };
    let mode = a.ranges.unwrap_or_default();
    let metrics = tasks
        .iter()
        .map(|&t| evaluate_run(&run, &stored, t, mode))
        .collect::<Result<Vec<_>>>()?;
    for m in &metrics {
        println!(
            "{} seed {} {}: mse {:.4} (channels {:?}, inverted {:?})",
            m.model_id,
            m.seed,
            m.task,
            m.mse.unwrap_or(f64::NAN),
            (m.channel_i.unwrap_or(0), m.channel_j.unwrap_or(0)),
            (m.invert_i.unwrap_or(false), m.invert_j.unwrap_or(false))
        );
    }
    let out = g.out.clone().unwrap_or(run_dir);
    std::fs::create_dir_all(&out)?;
    write_metrics_csv(&out.join("metrics.csv"), &metrics)?;
    Ok(())
}

fn cmd_traverse(a: TraverseArgs, g: &Globals) -> Result<()> {
    let run_dir = required(a.run, "run")?;
    let (_, stored) = load_run(&run_dir, a.data)?;
    let ckpt = load_checkpoint(&run_dir)?;
    let model = &ckpt.meta.config;
    let ds = &stored.dataset;
    let labels = labels_for(&stored, model.label_dims.first().copied().filter(|_| model.is_labeled()))?;
    let samples = a.samples.map_or_else(|| traversal_panel(ds), |l| l.usizes());
    let range = [a.min.unwrap_or(-3.0), a.max.unwrap_or(3.0)];
    let steps = a.steps.unwrap_or(10);
    let out = g.out.clone().unwrap_or_else(|| run_dir.join("traversal"));
    std::fs::create_dir_all(&out)?;
    for idx in samples {
        if idx >= ds.len() {
            return Err(Error::Parameter(format!("sample {idx} out of range ({} samples)", ds.len())));
        }
        let x = ds.images.select_rows(&[idx]);
        let y = labels.map(|l| l.select_rows(&[idx]));
        let grid = traverse(&ckpt.params, &x, y.as_deref(), model, range, steps)?;
        let [c1, c2] = ds.coords[idx];
        let path = out.join(format!("traversal_{idx}_c{c1}_{c2}.pgm"));
        write_traversal(&path, &grid)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_heatmap(a: RunArgs, g: &Globals) -> Result<()> {
    let run_dir = required(a.run, "run")?;
    let (_, stored) = load_run(&run_dir, a.data)?;
    let ckpt = load_checkpoint(&run_dir)?;
    let model = &ckpt.meta.config;
    let labels = labels_for(&stored, model.label_dims.first().copied().filter(|_| model.is_labeled()))?;
    let maps = heatmap(&ckpt.params, &stored.dataset, labels, model)?;
    let out = g.out.clone().unwrap_or_else(|| run_dir.join("heatmap"));
    write_heatmaps(&out, &maps)?;
    println!("wrote {} heat maps to {}", maps.len(), out.display());
    Ok(())
}

fn cmd_report(a: ReportArgs, g: &Globals) -> Result<()> {
    let input = required(a.input, "in")?;
    let task = a.task.unwrap_or(Task::Polar);
    let out = g.out.clone().unwrap_or_else(|| input.clone());
    let (_, files) = pool(g.threads)?.install(|| report_runs(&input, task, a.ranges.unwrap_or_default(), &out))?;
    print!("{}", std::fs::read_to_string(&files.report_txt)?);
    Ok(())
}
