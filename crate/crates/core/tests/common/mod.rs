//! Shared helpers: a tiny WeLa instance and an independent 64-bit loss oracle
//! written with plain loops.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wela::model::{init_params, ModelConfig};
use wela::numerics::{ParamStore, Tensor};

pub struct TinyInstance {
    pub cfg: ModelConfig,
    pub params: ParamStore<f64>,
    pub x: Tensor<f64>,
    pub y: Vec<Tensor<f64>>,
    pub eps: Tensor<f64>,
    pub n: usize,
}

/// D=6, hidden=4, K=2, one label with p=2, batch M=4, β=1, γ=2.
pub fn tiny_instance(seed: u64) -> TinyInstance {
    let mut cfg = ModelConfig::wela(6, 2, 1, 2.0, 1.0).with_hidden(4);
    cfg.latent_dim = 2;
    let mut params: ParamStore<f64> = init_params(&cfg, seed).unwrap().cast();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // non-zero biases so every code path carries signal
    for (_, p) in params.iter_mut() {
        if p.value.shape().len() == 1 {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
    let m = 4;
    let x = Tensor::new(&[m, 6], (0..m * 6).map(|_| rng.random::<f64>()).collect()).unwrap();
    let mut y = Tensor::zeros(&[m, 2]);
    for i in 0..m {
        y.row_mut(i)[i % 2] = 1.0;
    }
    let eps = Tensor::new(&[m, 2], (0..m * 2).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
    TinyInstance {
        cfg,
        params,
        x,
        y: vec![y],
        eps,
        n: 64,
    }
}

fn dense(params: &ParamStore<f64>, layer: &str, input: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let w = params.get(&format!("{layer}.w")).unwrap();
    let b = params.get(&format!("{layer}.b")).unwrap();
    let (n_in, n_out) = (w.rows(), w.cols());
    input
        .iter()
        .map(|row| {
            (0..n_out)
                .map(|j| b.data()[j] + (0..n_in).map(|k| row[k] * w.data()[k * n_out + j]).sum::<f64>())
                .collect()
        })
        .collect()
}

fn relu(v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.into_iter().map(|r| r.into_iter().map(|x| x.max(0.0)).collect()).collect()
}

fn rows(t: &Tensor<f64>) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

/// Terms `(recon_x, recon_y, kl, tc)` of the objective computed from scratch.
pub fn oracle_terms(
    cfg: &ModelConfig,
    params: &ParamStore<f64>,
    x: &Tensor<f64>,
    y: &[Tensor<f64>],
    eps: &Tensor<f64>,
    n: usize,
) -> (f64, Vec<f64>, f64, f64) {
    let m = x.rows();
    let k = cfg.latent_dim;
    let mut input = rows(x);
    for (i, r) in input.iter_mut().enumerate() {
        for yj in y {
            r.extend_from_slice(yj.row(i));
        }
    }
    let mut h = input;
    for l in 0..cfg.hidden_layers {
        h = relu(dense(params, &format!("enc.h{l}"), &h));
    }
    let head = dense(params, "enc.head", &h);
    let [lo, hi] = cfg.logvar_clamp;
    let mu: Vec<Vec<f64>> = head.iter().map(|r| r[..k].to_vec()).collect();
    let lv: Vec<Vec<f64>> = head.iter().map(|r| r[k..].iter().map(|v| v.clamp(lo, hi)).collect()).collect();
    let z: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..k).map(|c| mu[i][c] + (0.5 * lv[i][c]).exp() * eps.get2(i, c)).collect())
        .collect();
    let mut h = z.clone();
    for l in 0..cfg.hidden_layers {
        h = relu(dense(params, &format!("dec.h{l}"), &h));
    }
    let px = dense(params, "dec.pixels", &h);
    let mut recon_x = 0.0;
    for i in 0..m {
        for d in 0..cfg.obs_dim {
            let p = 1.0 / (1.0 + (-px[i][d]).exp());
            let t = x.get2(i, d);
            recon_x -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        }
    }
    recon_x /= m as f64;
    let mut recon_y = Vec::new();
    for (j, yj) in y.iter().enumerate() {
        let logits = dense(params, &format!("dec.label{j}"), &h);
        let mut s = 0.0;
        for i in 0..m {
            let z: f64 = logits[i].iter().map(|v| v.exp()).sum();
            let c = yj.row(i).iter().position(|&v| v == 1.0).unwrap();
            s -= (logits[i][c].exp() / z).ln();
        }
        recon_y.push(s / m as f64);
    }
    let mut kl = 0.0;
    for i in 0..m {
        for c in 0..k {
            kl += 0.5 * (mu[i][c].powi(2) + lv[i][c].exp() - lv[i][c] - 1.0);
        }
    }
    kl /= m as f64;
    let tc = oracle_tc(&z, &mu, &lv, n);
    (recon_x, recon_y, kl, tc)
}

/// Direct evaluation of the minibatch-weighted TC formula, densities taken
/// as plain products and sums without log-sum-exp tricks.
pub fn oracle_tc(z: &[Vec<f64>], mu: &[Vec<f64>], lv: &[Vec<f64>], n: usize) -> f64 {
    let m = z.len();
    let k = z[0].len();
    let dens = |i: usize, j: usize, c: usize| {
        let var = lv[j][c].exp();
        (-(z[i][c] - mu[j][c]).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let norm = (m * n) as f64;
    let mut acc = 0.0;
    for i in 0..m {
        let joint: f64 = (0..m).map(|j| (0..k).map(|c| dens(i, j, c)).product::<f64>()).sum();
        let mut marg = 0.0;
        for c in 0..k {
            marg += ((0..m).map(|j| dens(i, j, c)).sum::<f64>() / norm).ln();
        }
        acc += (joint / norm).ln() - marg;
    }
    acc / m as f64
}
