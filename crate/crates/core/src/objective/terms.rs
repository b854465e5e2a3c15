use crate::error::{Error, Result};
use crate::model::LatentCode;
use crate::numerics::{Real, Tensor};

pub const LOG_2PI: f64 = 1.837_877_066_409_345_5;

fn softplus(l: f64) -> f64 {
    l.max(0.0) + (-l.abs()).exp().ln_1p()
}

fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Negative Bernoulli log-likelihood with logits, summed over pixels and
/// averaged over the batch.
pub fn bernoulli_recon<T: Real>(pixel_logits: &Tensor<T>, x: &Tensor<T>) -> Result<f64> {
    if pixel_logits.shape() != x.shape() {
        return Err(Error::dim("bernoulli_recon", pixel_logits.shape(), x.shape()));
    }
    let mut total = 0.0f64;
    for (&l, &v) in pixel_logits.data().iter().zip(x.data()) {
        let (l, v) = (l.as_f64(), v.as_f64());
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("pixel value {v} outside [0, 1]")));
        }
        total += softplus(l) - v * l;
    }
    Ok(total / pixel_logits.rows() as f64)
}

/// `(sigmoid(logit) - x) / B`.
pub fn bernoulli_recon_grad<T: Real>(pixel_logits: &Tensor<T>, x: &Tensor<T>) -> Tensor<T> {
    let inv_b = 1.0 / pixel_logits.rows() as f64;
    let data = pixel_logits
        .data()
        .iter()
        .zip(x.data())
        .map(|(&l, &v)| T::from_f64((sigmoid(l.as_f64()) - v.as_f64()) * inv_b))
        .collect();
    Tensor::new(pixel_logits.shape(), data).expect("shape preserved")
}

fn one_hot_index<T: Real>(row: &[T]) -> Option<usize> {
    let mut hot = None;
    for (i, &v) in row.iter().enumerate() {
        if v == T::one() {
            if hot.is_some() {
                return None;
            }
            hot = Some(i);
        } else if v != T::zero() {
            return None;
        }
    }
    hot
}

fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|&v| v - lse).collect()
}

/// Mean over the batch of `-log softmax(logits)[class]`.
pub fn categorical_recon<T: Real>(label_logits: &Tensor<T>, y_onehot: &Tensor<T>) -> Result<f64> {
    if label_logits.shape() != y_onehot.shape() {
        return Err(Error::dim("categorical_recon", label_logits.shape(), y_onehot.shape()));
    }
    let rows = label_logits.rows();
    let mut total = 0.0;
    for i in 0..rows {
        let c = one_hot_index(y_onehot.row(i))
            .ok_or_else(|| Error::Domain(format!("label row {i} is not one-hot")))?;
        let logits: Vec<f64> = label_logits.row(i).iter().map(|v| v.as_f64()).collect();
        total -= log_softmax_row(&logits)[c];
    }
    Ok(total / rows as f64)
}

/// `(softmax(logits) - y) / B`.
pub fn categorical_recon_grad<T: Real>(label_logits: &Tensor<T>, y_onehot: &Tensor<T>) -> Tensor<T> {
    let rows = label_logits.rows();
    let inv_b = 1.0 / rows as f64;
    let mut g = Tensor::zeros(label_logits.shape());
    for i in 0..rows {
        let logits: Vec<f64> = label_logits.row(i).iter().map(|v| v.as_f64()).collect();
        let ls = log_softmax_row(&logits);
        for ((out, l), &y) in g.row_mut(i).iter_mut().zip(ls).zip(y_onehot.row(i)) {
            *out = T::from_f64((l.exp() - y.as_f64()) * inv_b);
        }
    }
    g
}

/// `KL(N(mu, exp(logvar)) || N(0, I))`, summed over channels, averaged over the batch.
pub fn gaussian_kl<T: Real>(code: &LatentCode<T>) -> f64 {
    let total: f64 = code
        .mu
        .data()
        .iter()
        .zip(code.logvar.data())
        .map(|(&m, &lv)| {
            let (m, lv) = (m.as_f64(), lv.as_f64());
            0.5 * (m * m + lv.exp() - lv - 1.0)
        })
        .sum();
    total / code.batch() as f64
}

/// Gradients of [`gaussian_kl`] with respect to `mu` and `logvar`.
pub fn gaussian_kl_grad<T: Real>(code: &LatentCode<T>) -> (Tensor<T>, Tensor<T>) {
    let inv_b = 1.0 / code.batch() as f64;
    let gmu = code.mu.map(|m| T::from_f64(m.as_f64() * inv_b));
    let glv = code
        .logvar
        .map(|lv| T::from_f64(0.5 * (lv.as_f64().exp() - 1.0) * inv_b));
    (gmu, glv)
}

/// Per-pair, per-channel log densities `log N(z_ik; mu_jk, exp(logvar_jk))`
/// as a `B × B' × K` tensor.
pub fn log_gaussian<T: Real>(z: &Tensor<T>, code: &LatentCode<T>) -> Result<Tensor<f64>> {
    let (b, k) = z.dims2()?;
    let (b2, k2) = code.mu.dims2()?;
    if k != k2 {
        return Err(Error::dim("log_gaussian", z.shape(), code.mu.shape()));
    }
    let mut out = Vec::with_capacity(b * b2 * k);
    for i in 0..b {
        let zi = z.row(i);
        for j in 0..b2 {
            for ((&zv, &m), &lv) in zi.iter().zip(code.mu.row(j)).zip(code.logvar.row(j)) {
                let (zv, m, lv) = (zv.as_f64(), m.as_f64(), lv.as_f64());
                let d = zv - m;
                out.push(-0.5 * (LOG_2PI + lv + d * d * (-lv).exp()));
            }
        }
    }
    Tensor::new(&[b, b2, k], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn t(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn bernoulli_max_entropy_and_saturation() {
        let d = 7;
        let l = Tensor::<f32>::zeros(&[2, d]);
        let x = Tensor::<f32>::full(&[2, d], 0.5);
        let r = bernoulli_recon(&l, &x).unwrap();
        assert!((r - d as f64 * 2f64.ln()).abs() < 1e-9);
        assert!(bernoulli_recon(&t(&[&[20.0]]), &t(&[&[1.0]])).unwrap() < 1e-8);
        assert!(matches!(bernoulli_recon(&t(&[&[0.0]]), &t(&[&[1.5]])), Err(Error::Domain(_))));
    }

    #[test]
    fn bernoulli_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits: Vec<f64> = (0..24).map(|_| rng.random_range(-6.0..6.0)).collect();
        let xs: Vec<f64> = (0..24).map(|_| rng.random::<f64>()).collect();
        let direct: f64 = logits
            .iter()
            .zip(&xs)
            .map(|(&l, &x)| {
                let p = 1.0 / (1.0 + (-l).exp());
                -(x * p.ln() + (1.0 - x) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 4.0;
        let l32 = Tensor::<f32>::new(&[4, 6], logits.iter().map(|&v| v as f32).collect()).unwrap();
        let x32 = Tensor::<f32>::new(&[4, 6], xs.iter().map(|&v| v as f32).collect()).unwrap();
        // inputs are rounded to f32 before the production path sees them
        let direct32: f64 = {
            let l64 = l32.cast::<f64>();
            let x64 = x32.cast::<f64>();
            l64.data()
                .iter()
                .zip(x64.data())
                .map(|(&l, &x)| {
                    let p = 1.0 / (1.0 + (-l).exp());
                    -(x * p.ln() + (1.0 - x) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / 4.0
        };
        assert!((bernoulli_recon(&l32, &x32).unwrap() - direct32).abs() < 1e-5);
        assert!((direct - direct32).abs() < 1e-4);
    }

    #[test]
    fn categorical_cases() {
        let p = 5;
        let l = Tensor::<f64>::zeros(&[3, p]);
        let mut y = Tensor::<f64>::zeros(&[3, p]);
        for i in 0..3 {
            y.row_mut(i)[i] = 1.0;
        }
        assert!((categorical_recon(&l, &y).unwrap() - (p as f64).ln()).abs() < 1e-12);
        let l2 = t(&[&[20.0, 0.0, 0.0]]);
        let y2 = t(&[&[1.0, 0.0, 0.0]]);
        assert!(categorical_recon(&l2, &y2).unwrap() < 1e-8);
        let bad = t(&[&[1.0, 1.0, 0.0]]);
        assert!(matches!(categorical_recon(&l2, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn categorical_matches_log_sum_exp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (rows, p) = (6, 4);
        let logits: Vec<f64> = (0..rows * p).map(|_| rng.random_range(-5.0..5.0)).collect();
        let classes: Vec<usize> = (0..rows).map(|_| rng.random_range(0..p)).collect();
        let mut y = vec![0.0; rows * p];
        for (i, &c) in classes.iter().enumerate() {
            y[i * p + c] = 1.0;
        }
        let mut oracle = 0.0;
        for i in 0..rows {
            let row = &logits[i * p..(i + 1) * p];
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            oracle -= (row[classes[i]].exp() / z).ln();
        }
        oracle /= rows as f64;
        let got = categorical_recon(
            &Tensor::new(&[rows, p], logits).unwrap(),
            &Tensor::new(&[rows, p], y).unwrap(),
        )
        .unwrap();
        assert!((got - oracle).abs() < 1e-6);
    }

    #[test]
    fn kl_closed_form_cases() {
        let zero = LatentCode {
            mu: Tensor::<f64>::zeros(&[2, 3]),
            logvar: Tensor::zeros(&[2, 3]),
        };
        assert_eq!(gaussian_kl(&zero), 0.0);
        let c = LatentCode {
            mu: t(&[&[1.0, 0.0]]),
            logvar: Tensor::zeros(&[1, 2]),
        };
        assert!((gaussian_kl(&c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mu, lv) = (0.8f64, -0.6f64);
        let sd = (0.5 * lv).exp();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            let z = mu + sd * e;
            let log_q = -0.5 * (LOG_2PI + lv + e * e);
            let log_p = -0.5 * (LOG_2PI + z * z);
            acc += log_q - log_p;
        }
        let mc = acc / n as f64;
        let code = LatentCode {
            mu: t(&[&[mu]]),
            logvar: t(&[&[lv]]),
        };
        let exact = gaussian_kl(&code);
        assert!((mc - exact).abs() < 0.02 * exact, "{mc} vs {exact}");
    }

    #[test]
    fn log_gaussian_cases() {
        let code = LatentCode {
            mu: t(&[&[0.0, 1.0]]),
            logvar: Tensor::zeros(&[1, 2]),
        };
        let at_mean = log_gaussian(&t(&[&[0.0, 1.0]]), &code).unwrap();
        assert!(at_mean.data().iter().all(|&v| (v + 0.5 * LOG_2PI).abs() < 1e-12));
        let off = log_gaussian(&t(&[&[1.0, 1.0]]), &code).unwrap();
        assert!((off.data()[0] + 0.5 * LOG_2PI + 0.5).abs() < 1e-12);
    }

    #[test]
    fn log_gaussian_matches_direct_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Tensor::<f32>::new(&[3, 2], (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let code = LatentCode {
            mu: Tensor::<f32>::new(&[4, 2], (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(),
            logvar: Tensor::<f32>::new(&[4, 2], (0..8).map(|_| rng.random_range(-1.5..1.0)).collect()).unwrap(),
        };
        let got = log_gaussian(&z, &code).unwrap();
        assert_eq!(got.shape(), &[3, 4, 2]);
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..2 {
                    let zz = z.get2(i, k) as f64;
                    let m = code.mu.get2(j, k) as f64;
                    let var = (code.logvar.get2(j, k) as f64).exp();
                    let dens = (-(zz - m).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
                    assert!((got.data()[(i * 4 + j) * 2 + k] - dens.ln()).abs() < 1e-6);
                }
            }
        }
    }
}
