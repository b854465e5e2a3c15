//! Compares analytic gradients of the full objective with central
//! differences and shows the total-correlation estimator on small batches.
//!
//!     cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wela::model::{init_params, LatentCode, ModelConfig};
use wela::numerics::{grad_check, ParamStore, Tensor};
use wela::objective::{tc_mws_estimate, wela_loss_and_grad, Batch};

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, f: impl Fn(&mut ChaCha8Rng) -> f64) -> Tensor<f64> {
    Tensor::new(&[rows, cols], (0..rows * cols).map(|_| f(rng)).collect()).unwrap()
}

fn main() -> wela::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = ModelConfig::wela(9, 3, 2, 5.0, 2.0).with_hidden(6);
    let mut params: ParamStore<f64> = init_params(&cfg, 7)?.cast();
    // zero biases put whole rows on the ReLU kink, where differences are one-sided
    for (_, p) in params.iter_mut() {
        for v in p.value.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let m = 5;
    let x = random(&mut rng, m, 9, |r| r.random());
    let y: Vec<Tensor<f64>> = (0..2)
        .map(|_| {
            let mut t = Tensor::zeros(&[m, 3]);
            for i in 0..m {
                t.row_mut(i)[rng.random_range(0..3)] = 1.0;
            }
            t
        })
        .collect();
    let eps = random(&mut rng, m, 2, |r| r.sample(StandardNormal));
    let batch = Batch { x: &x, y: Some(&y), eps: &eps };
    let loss = wela_loss_and_grad(&mut params, &cfg, batch, 100)?;
    println!("recon_x {:.4} recon_y {:?} kl {:.4} tc {:.4} total {:.4}", loss.recon_x, loss.recon_y, loss.kl, loss.tc, loss.total);
    let err = grad_check(|p| wela_loss_and_grad(p, &cfg, batch, 100).unwrap().total, &mut params, 1e-4);
    println!("max relative gradient error {err:.2e}");

    for (m, k) in [(1, 1), (1, 3), (8, 1), (8, 3), (64, 3)] {
        let z = random(&mut rng, m, k, |r| r.sample(StandardNormal));
        let code = LatentCode {
            mu: random(&mut rng, m, k, |r| r.random_range(-1.0..1.0)),
            logvar: random(&mut rng, m, k, |r| r.random_range(-1.0..0.5)),
        };
        println!("TC estimate M={m:2} K={k}: {:.4}", tc_mws_estimate(&z, &code, 1000)?);
    }
    Ok(())
}
