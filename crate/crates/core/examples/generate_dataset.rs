//! Generates a Blobs dataset with weak labels, stores it and reads it back.
//!
//!     cargo run --release --example generate_dataset -- [out_dir] [side]

use std::path::PathBuf;

use wela::dataset::{build_weak_labels, generate_dataset, load_dataset, save_dataset, GenerateConfig, WeakLabelConfig};
use wela::evaluation::{write_pgm, GrayMapping};

fn main() -> wela::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(1).map_or("target/examples/blobs", String::as_str));
    let side: usize = args.get(2).map_or(32, |s| s.parse().unwrap());

    let ds = generate_dataset(&GenerateConfig::new(side, 5))?;
    let labels: Vec<_> = (2..=4)
        .map(|p| build_weak_labels(&ds, &WeakLabelConfig::new(p, side)))
        .collect::<wela::Result<_>>()?;
    let manifest = save_dataset(&out, &ds, &labels)?;
    println!("{} samples, D={}, hash {}", ds.len(), ds.dim(), manifest.content_hash);

    let back = load_dataset(&out)?;
    assert_eq!(back.dataset.images, ds.images);
    let l3 = back.labels_for(3).expect("p=3 labels");
    for idx in [0, ds.index_of(side / 2, side / 2, 2), ds.len() - 1] {
        let [c1, c2] = ds.coords[idx];
        let classes: Vec<usize> = (0..l3.onehots.len()).map(|j| l3.classes(j)[idx]).collect();
        println!("sample {idx}: position ({c1}, {c2}) sigma {:.2} labels {classes:?}", ds.sigmas[idx]);
        let pixels: Vec<f64> = ds.images.row(idx).iter().map(|&v| v as f64).collect();
        write_pgm(
            &out.join(format!("sample_{idx}.pgm")),
            side,
            side,
            &pixels,
            GrayMapping { lo: 0.0, hi: 1.0 },
            "pixel intensity",
        )?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
