//! Minibatch-weighted sampling estimate of the total correlation
//! `KL(q(z) || Π_k q(z_k))`, treating the batch posteriors as a mixture
//! whose weights are rescaled by the dataset size.

use crate::error::{Error, Result};
use crate::model::LatentCode;
use crate::numerics::{Real, Tensor};

use super::terms::log_gaussian;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check<T: Real>(z: &Tensor<T>, codes: &LatentCode<T>, n: usize) -> Result<(usize, usize)> {
    let (m, k) = z.dims2()?;
    if codes.mu.shape() != z.shape() || codes.logvar.shape() != z.shape() {
        return Err(Error::dim("tc_mws_estimate", z.shape(), codes.mu.shape()));
    }
    if m == 0 {
        return Err(Error::Parameter("TC estimate needs a non-empty batch".into()));
    }
    if n < m {
        return Err(Error::Parameter(format!("dataset size {n} is smaller than the batch {m}")));
    }
    Ok((m, k))
}

/// Estimated total correlation of the aggregate posterior for a batch of
/// samples `z[i] ~ q(·|x_i)` and their posterior parameters.
pub fn tc_mws_estimate<T: Real>(z: &Tensor<T>, codes: &LatentCode<T>, n: usize) -> Result<f64> {
    let (m, k) = check(z, codes, n)?;
    let lg = log_gaussian(z, codes)?;
    let lg = lg.data();
    let log_mn = ((m * n) as f64).ln();
    let mut acc = 0.0;
    for i in 0..m {
        let block = &lg[i * m * k..(i + 1) * m * k];
        let joint = log_sum_exp((0..m).map(|j| block[j * k..(j + 1) * k].iter().sum::<f64>()));
        let mut marginals = 0.0;
        for kk in 0..k {
            marginals += log_sum_exp((0..m).map(|j| block[j * k + kk])) - log_mn;
        }
        acc += (joint - log_mn) - marginals;
    }
    Ok(acc / m as f64)
}

/// TC estimate with its gradients with respect to `z`, `mu` and `logvar`.
pub struct TcGrad<T> {
    pub value: f64,
    pub z: Tensor<T>,
    pub mu: Tensor<T>,
    pub logvar: Tensor<T>,
}

pub fn tc_mws_grad<T: Real>(z: &Tensor<T>, codes: &LatentCode<T>, n: usize) -> Result<TcGrad<T>> {
    let (m, k) = check(z, codes, n)?;
    let value = tc_mws_estimate(z, codes, n)?;
    let lg = log_gaussian(z, codes)?;
    let lg = lg.data();
    let zf: Vec<f64> = z.data().iter().map(|v| v.as_f64()).collect();
    let muf: Vec<f64> = codes.mu.data().iter().map(|v| v.as_f64()).collect();
    let inv_var: Vec<f64> = codes.logvar.data().iter().map(|v| (-v.as_f64()).exp()).collect();
    let mut gz = vec![0.0f64; m * k];
    let mut gmu = vec![0.0f64; m * k];
    let mut glv = vec![0.0f64; m * k];
    let inv_m = 1.0 / m as f64;
    let mut joint_w = vec![0.0f64; m];
    let mut marg_w = vec![0.0f64; m * k];
    for i in 0..m {
        let block = &lg[i * m * k..(i + 1) * m * k];
        // softmax over j of the joint log densities
        let sums: Vec<f64> = (0..m).map(|j| block[j * k..(j + 1) * k].iter().sum()).collect();
        let lse = log_sum_exp(sums.iter().copied());
        for j in 0..m {
            joint_w[j] = (sums[j] - lse).exp();
        }
        // softmax over j per channel
        for kk in 0..k {
            let lse_k = log_sum_exp((0..m).map(|j| block[j * k + kk]));
            for j in 0..m {
                marg_w[j * k + kk] = (block[j * k + kk] - lse_k).exp();
            }
        }
        for j in 0..m {
            for kk in 0..k {
                // dTC / dlog N(z_ik; mu_jk, var_jk)
                let w = inv_m * (joint_w[j] - marg_w[j * k + kk]);
                if w == 0.0 {
                    continue;
                }
                let d = zf[i * k + kk] - muf[j * k + kk];
                let iv = inv_var[j * k + kk];
                gz[i * k + kk] -= w * d * iv;
                gmu[j * k + kk] += w * d * iv;
                glv[j * k + kk] += w * 0.5 * (d * d * iv - 1.0);
            }
        }
    }
    let to_t = |v: Vec<f64>| Tensor::new(&[m, k], v.into_iter().map(T::from_f64).collect());
    Ok(TcGrad {
        value,
        z: to_t(gz)?,
        mu: to_t(gmu)?,
        logvar: to_t(glv)?,
    })
}
