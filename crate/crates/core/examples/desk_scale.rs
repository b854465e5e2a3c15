//! Trains the TCVAE baseline and WeLa-VAE on a 16×16 Blobs canvas and
//! prints coordinate-recovery scores per seed.
//!
//!     cargo run --release --example desk_scale -- [lr] [seeds] [hidden] [epochs] [gamma]

use std::time::Instant;

use wela::dataset::{build_weak_labels, generate_dataset, GenerateConfig, WeakLabelConfig};
use wela::evaluation::{cartesian_mse, polar_mse, represent, MetricRanges};
use wela::model::ModelConfig;
use wela::trainer::{fit, label_accuracy, TrainConfig};

fn main() -> wela::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let lr: f32 = args.get(1).map_or(1e-3, |s| s.parse().unwrap());
    let seeds: u64 = args.get(2).map_or(3, |s| s.parse().unwrap());
    let hidden: usize = args.get(3).map_or(ModelConfig::HIDDEN, |s| s.parse().unwrap());
    let epochs: usize = args.get(4).map_or(30, |s| s.parse().unwrap());

    let side = 16;
    let ds = generate_dataset(&GenerateConfig::new(side, 4))?;
    let labels = build_weak_labels(&ds, &WeakLabelConfig::new(3, side))?;
    let ranges = MetricRanges::for_side(side);
    let d = ds.dim();
    println!("N={} D={d} lr={lr} hidden={hidden}", ds.len());

    let tcvae = ModelConfig::tcvae(d, 2, 40.0).with_hidden(hidden);
    let gamma: f64 = args.get(5).map_or((d as f64 / 6.0).floor(), |s| s.parse().unwrap());
    let wela = ModelConfig::wela(d, 3, 2, gamma, 40.0).with_hidden(hidden);
    for (name, model, lab) in [("tcvae", tcvae, None), ("wela-p3", wela, Some(&labels))] {
        for seed in 0..seeds {
            let mut cfg = TrainConfig::new(model.clone(), seed);
            cfg.epochs = epochs;
            cfg.batch_size = 128;
            cfg.learning_rate = lr;
            let t = Instant::now();
            let trained = fit(&ds, lab, &cfg)?;
            let rep = represent(&trained.params, &ds, lab, &model)?;
            let cart = cartesian_mse(&rep, ranges)?;
            let polar = polar_mse(&rep, ranges)?;
            let acc = match lab {
                Some(l) => label_accuracy(&trained.params, &ds, l, &model)?,
                None => Vec::new(),
            };
            println!(
                "{name} seed {seed}: loss {:.1} -> {:.1}  cartesian {:.3}  polar {:.3}  acc {:?}  ({:.1}s)",
                trained.loss_summary.first_epoch_mean_total,
                trained.loss_summary.last_epoch_mean_total,
                cart.mse,
                polar.mse,
                acc,
                t.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
