//! Trains a small WeLa-VAE, then writes latent traversals and heat maps
//! as PGM images.
//!
//!     cargo run --release --example visualize -- [out_dir]

use std::path::PathBuf;

use wela::dataset::{build_weak_labels, generate_dataset, GenerateConfig, WeakLabelConfig};
use wela::evaluation::{heatmap, traversal_panel, traverse, write_heatmaps, write_traversal};
use wela::model::ModelConfig;
use wela::trainer::{fit, TrainConfig};

fn main() -> wela::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(1).map_or("target/examples/visualize", String::as_str));

    let side = 16;
    let ds = generate_dataset(&GenerateConfig::new(side, 4))?;
    let labels = build_weak_labels(&ds, &WeakLabelConfig::new(3, side))?;
    let model = ModelConfig::wela(ds.dim(), 3, 2, 42.0, 40.0).with_hidden(256);
    let mut cfg = TrainConfig::new(model.clone(), 0);
    cfg.epochs = 20;
    cfg.batch_size = 128;
    cfg.learning_rate = 1e-3;
    let trained = fit(&ds, Some(&labels), &cfg)?;

    for idx in traversal_panel(&ds) {
        let x = ds.images.select_rows(&[idx]);
        let y: Vec<_> = labels.onehots.iter().map(|t| t.select_rows(&[idx])).collect();
        let grid = traverse(&trained.params, &x, Some(&y), &model, [-3.0, 3.0], 10)?;
        let [c1, c2] = ds.coords[idx];
        let path = out.join(format!("traversal_{idx}_c{c1}_{c2}.pgm"));
        write_traversal(&path, &grid)?;
        println!("wrote {}", path.display());
    }

    let maps = heatmap(&trained.params, &ds, Some(&labels), &model)?;
    write_heatmaps(&out.join("heatmap"), &maps)?;
    for (k, map) in maps.iter().enumerate() {
        let lo = map.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = map.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("heat map {k}: mean code in [{lo:.2}, {hi:.2}]");
    }
    Ok(())
}
