//! Scores mean codes against the ground-truth coordinates, both for
//! hand-built codes and for a trained model.
//!
//!     cargo run --release --example evaluate_metrics

use wela::dataset::{angle_of, distance_of, generate_dataset, GenerateConfig};
use wela::evaluation::{cartesian_mse, polar_mse, represent, MetricRanges, RepresentationMatrix};
use wela::model::ModelConfig;
use wela::numerics::Tensor;
use wela::trainer::{fit, TrainConfig};

fn code(side: usize, f: impl Fn(f64, f64) -> [f64; 2]) -> wela::Result<RepresentationMatrix> {
    let coords: Vec<[f64; 2]> = (0..side * side).map(|i| [(i / side) as f64, (i % side) as f64]).collect();
    let mu: Vec<f64> = coords.iter().flat_map(|c| f(c[0], c[1])).collect();
    RepresentationMatrix::new(Tensor::new(&[coords.len(), 2], mu)?, coords)
}

fn main() -> wela::Result<()> {
    for (name, ranges) in [("extent", MetricRanges::for_side(64)), ("published", MetricRanges::published())] {
        println!("64x64 grid, ranges {name}: {ranges:?}");
        for (label, rep) in [
            ("cartesian truth", code(64, |a, b| [a, b])?),
            ("polar truth", code(64, |a, b| [angle_of(a, b), distance_of(a, b)])?),
            ("swapped, inverted", code(64, |a, b| [-b, 3.0 * a])?),
            ("constant", code(64, |_, _| [0.0, 0.0])?),
        ] {
            let c = cartesian_mse(&rep, ranges)?;
            let p = polar_mse(&rep, ranges)?;
            println!(
                "  {label:18} cartesian {:8.3} {:?} {:?}  polar {:8.3} {:?} {:?}",
                c.mse, c.channel_assignment, c.inversion_flags, p.mse, p.channel_assignment, p.inversion_flags
            );
        }
    }

    let side = 16;
    let ds = generate_dataset(&GenerateConfig::new(side, 4))?;
    let model = ModelConfig::tcvae(ds.dim(), 2, 40.0);
    let mut cfg = TrainConfig::new(model.clone(), 1);
    cfg.epochs = 30;
    cfg.batch_size = 128;
    cfg.learning_rate = 1e-3;
    let trained = fit(&ds, None, &cfg)?;
    let rep = represent(&trained.params, &ds, None, &model)?;
    let ranges = MetricRanges::for_side(side);
    println!(
        "trained TCVAE: cartesian {:.3}  polar {:.3}",
        cartesian_mse(&rep, ranges)?.mse,
        polar_mse(&rep, ranges)?.mse
    );
    Ok(())
}
