use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    decode_cached, decoder_backward, encode_cached, encoder_backward, reparameterize, ModelConfig,
};
use crate::numerics::{ParamStore, Real, Tensor};

use super::tc::{tc_mws_estimate, tc_mws_grad};
use super::terms::{
    bernoulli_recon, bernoulli_recon_grad, categorical_recon, categorical_recon_grad, gaussian_kl,
    gaussian_kl_grad,
};

/// Per-term values of one loss evaluation.
///
/// `total = recon_x + gamma · Σ recon_y + kl + beta · tc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon_x: f64,
    pub recon_y: Vec<f64>,
    pub kl: f64,
    pub tc: f64,
    pub total: f64,
    pub gamma: f64,
    pub beta: f64,
    pub dataset_size: usize,
}

impl LossBreakdown {
    fn assemble(recon_x: f64, recon_y: Vec<f64>, kl: f64, tc: f64, cfg: &ModelConfig, n: usize) -> Self {
        let total = recon_x + cfg.gamma * recon_y.iter().sum::<f64>() + kl + cfg.beta * tc;
        Self {
            recon_x,
            recon_y,
            kl,
            tc,
            total,
            gamma: cfg.gamma,
            beta: cfg.beta,
            dataset_size: n,
        }
    }

    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<String> {
        if !self.recon_x.is_finite() {
            return Some("recon_x".into());
        }
        if let Some(j) = self.recon_y.iter().position(|v| !v.is_finite()) {
            return Some(format!("recon_y[{j}]"));
        }
        if !self.kl.is_finite() {
            return Some("kl".into());
        }
        if !self.tc.is_finite() {
            return Some("tc".into());
        }
        (!self.total.is_finite()).then(|| "total".into())
    }
}

/// Inputs of one loss evaluation; `eps` is the standard-normal noise for
/// the reparameterized sample.
#[derive(Clone, Copy)]
pub struct Batch<'a, T = f32> {
    pub x: &'a Tensor<T>,
    pub y: Option<&'a [Tensor<T>]>,
    pub eps: &'a Tensor<T>,
}

fn check_batch<T: Real>(cfg: &ModelConfig, batch: &Batch<'_, T>) -> Result<()> {
    let rows = batch.x.rows();
    if batch.eps.shape() != [rows, cfg.latent_dim] {
        return Err(Error::dim("loss noise", batch.eps.shape(), &[rows, cfg.latent_dim]));
    }
    if cfg.is_labeled() != batch.y.is_some() {
        return Err(Error::Config("labels must be given iff the model is labeled".into()));
    }
    Ok(())
}

/// Forward-only evaluation of the WeLa objective (TCVAE when the model has
/// no labels; the plain negative ELBO when additionally `beta = 0`).
pub fn wela_loss<T: Real>(
    params: &ParamStore<T>,
    cfg: &ModelConfig,
    batch: Batch<'_, T>,
    dataset_size: usize,
) -> Result<LossBreakdown> {
    check_batch(cfg, &batch)?;
    let (code, _) = encode_cached(params, cfg, batch.x, batch.y)?;
    let z = reparameterize(&code, batch.eps)?;
    let (out, _) = decode_cached(params, cfg, &z)?;
    let recon_x = bernoulli_recon(&out.pixel_logits, batch.x)?;
    let recon_y = match batch.y {
        Some(ys) => out
            .label_logits
            .iter()
            .zip(ys)
            .map(|(l, y)| categorical_recon(l, y))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let kl = gaussian_kl(&code);
    let tc = tc_mws_estimate(&z, &code, dataset_size)?;
    Ok(LossBreakdown::assemble(recon_x, recon_y, kl, tc, cfg, dataset_size))
}

/// Evaluates the objective and overwrites every gradient buffer with its
/// gradient. The TC term is differentiated through both `z` and the codes.
pub fn wela_loss_and_grad<T: Real>(
    params: &mut ParamStore<T>,
    cfg: &ModelConfig,
    batch: Batch<'_, T>,
    dataset_size: usize,
) -> Result<LossBreakdown> {
    check_batch(cfg, &batch)?;
    params.zero_grads();
    let (code, enc_cache) = encode_cached(params, cfg, batch.x, batch.y)?;
    let z = reparameterize(&code, batch.eps)?;
    let (out, dec_cache) = decode_cached(params, cfg, &z)?;

    let recon_x = bernoulli_recon(&out.pixel_logits, batch.x)?;
    let g_pixels = bernoulli_recon_grad(&out.pixel_logits, batch.x);
    let gamma = T::from_f64(cfg.gamma);
    let mut recon_y = Vec::new();
    let mut g_labels = Vec::new();
    if let Some(ys) = batch.y {
        for (l, y) in out.label_logits.iter().zip(ys) {
            recon_y.push(categorical_recon(l, y)?);
            g_labels.push(categorical_recon_grad(l, y).map(|g| g * gamma));
        }
    }
    let mut g_z = decoder_backward(params, cfg, &dec_cache, &g_pixels, &g_labels)?;

    let kl = gaussian_kl(&code);
    let (mut g_mu, mut g_lv) = gaussian_kl_grad(&code);

    let tc = tc_mws_grad(&z, &code, dataset_size)?;
    let beta = T::from_f64(cfg.beta);
    if cfg.beta != 0.0 {
        for (a, &b) in g_z.data_mut().iter_mut().zip(tc.z.data()) {
            *a = *a + beta * b;
        }
        for (a, &b) in g_mu.data_mut().iter_mut().zip(tc.mu.data()) {
            *a = *a + beta * b;
        }
        for (a, &b) in g_lv.data_mut().iter_mut().zip(tc.logvar.data()) {
            *a = *a + beta * b;
        }
    }

    // z = mu + exp(logvar/2)·eps  ⇒  dz/dmu = 1, dz/dlogvar = (z - mu)/2
    let half = T::from_f64(0.5);
    for (((gm, gl), &gz), (&zv, &m)) in g_mu
        .data_mut()
        .iter_mut()
        .zip(g_lv.data_mut().iter_mut())
        .zip(g_z.data())
        .zip(z.data().iter().zip(code.mu.data()))
    {
        *gm = *gm + gz;
        *gl = *gl + gz * half * (zv - m);
    }
    encoder_backward(params, cfg, &enc_cache, &g_mu, &g_lv)?;

    Ok(LossBreakdown::assemble(recon_x, recon_y, kl, tc.value, cfg, dataset_size))
}
