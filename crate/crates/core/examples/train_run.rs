//! Trains one WeLa-VAE run into a run directory and prints its log.
//!
//!     cargo run --release --example train_run -- [out_dir] [epochs]

use std::path::PathBuf;

use wela::dataset::{build_weak_labels, generate_dataset, GenerateConfig, WeakLabelConfig};
use wela::model::{load_checkpoint, ModelConfig};
use wela::trainer::{read_log_csv, read_run, train, TrainConfig};

fn main() -> wela::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(1).map_or("target/examples/run", String::as_str));
    let epochs: usize = args.get(2).map_or(20, |s| s.parse().unwrap());

    let side = 16;
    let ds = generate_dataset(&GenerateConfig::new(side, 4))?;
    let labels = build_weak_labels(&ds, &WeakLabelConfig::new(3, side))?;
    let model = ModelConfig::wela(ds.dim(), 3, 2, 42.0, 40.0).with_hidden(256);
    let mut cfg = TrainConfig::new(model, 0);
    cfg.epochs = epochs;
    cfg.batch_size = 128;
    cfg.learning_rate = 1e-3;

    let run = train(&ds, Some(&labels), &cfg, &out)?;
    let rows = read_log_csv(&run.log_path)?;
    for row in rows.iter().filter(|r| r.step % 8 == 0) {
        println!(
            "epoch {:3} step {:4}: total {:9.2} recon_x {:8.2} kl {:6.2} tc {:6.3}",
            row.epoch, row.step, row.total, row.recon_x, row.kl, row.tc
        );
    }
    println!("label accuracy {:?} in {:.1}s", run.label_accuracy, run.wall_seconds);

    assert_eq!(read_run(&out)?, run);
    let ckpt = load_checkpoint(&out)?;
    println!("checkpoint {} ({} steps)", run.checkpoint_sha256, ckpt.meta.loss.steps);
    Ok(())
}
