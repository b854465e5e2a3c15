//! Runs a small multi-seed sweep for both model families and prints the
//! aggregated report. Re-running resumes finished runs.
//!
//!     cargo run --release --example sweep_report -- [out_dir] [seeds]

use std::path::PathBuf;

use wela::dataset::{build_weak_labels, generate_dataset, save_dataset, GenerateConfig, WeakLabelConfig};
use wela::evaluation::Task;
use wela::experiments::{format_report_table, report_runs, run_sweep, Family, RangeMode, RunStatus, SweepConfig};

fn main() -> wela::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let root = PathBuf::from(args.get(1).map_or("target/examples/sweep", String::as_str));
    let seeds: u64 = args.get(2).map_or(3, |s| s.parse().unwrap());

    let side = 12;
    let data = root.join("data");
    let ds = generate_dataset(&GenerateConfig::new(side, 3))?;
    let labels: Vec<_> = [2, 3]
        .iter()
        .map(|&p| build_weak_labels(&ds, &WeakLabelConfig::new(p, side)))
        .collect::<wela::Result<_>>()?;
    save_dataset(&data, &ds, &labels)?;

    let gamma = (ds.dim() as f64 / 5.0).floor();
    for family in [Family::Tcvae, Family::Wela] {
        let mut cfg = SweepConfig::new(&data, family, &root);
        cfg.ps = vec![2, 3];
        cfg.gammas = cfg.ps.iter().map(|&p| (p, gamma)).collect();
        cfg.tcvae_latent_dim = 2;
        cfg.seeds = (0..seeds).collect();
        cfg.train.epochs = 10;
        cfg.train.batch_size = 64;
        cfg.train.hidden = 128;
        cfg.train.learning_rate = 1e-3;
        let records = run_sweep(&cfg)?;
        let resumed = records.iter().filter(|r| matches!(r.status, RunStatus::Resumed(_))).count();
        println!("{family}: {} runs, {resumed} resumed", records.len());
    }

    for task in [Task::Cartesian, Task::Polar] {
        let (rows, files) = report_runs(&root.join("runs"), task, RangeMode::Extent, &root)?;
        println!("{task}:\n{}", format_report_table(&rows, task));
        println!("written to {}", files.report_csv.display());
    }
    Ok(())
}
