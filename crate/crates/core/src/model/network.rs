use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    affine_backward_into, affine_forward, relu, relu_backward, ParamStore, Real, Tensor,
};

use super::config::{LayerSpec, ModelConfig};

/// Diagonal Gaussian posterior parameters for a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode<T = f32> {
    /// `B × K`
    pub mu: Tensor<T>,
    /// `B × K`, clamped.
    pub logvar: Tensor<T>,
}

impl<T: Real> LatentCode<T> {
    pub fn batch(&self) -> usize {
        self.mu.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            mu: self.mu.select_rows(idx),
            logvar: self.logvar.select_rows(idx),
        }
    }
}

/// Raw decoder logits; sigmoid/softmax are applied by the losses.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderOutput<T = f32> {
    pub pixel_logits: Tensor<T>,
    pub label_logits: Vec<Tensor<T>>,
}

struct TrunkCache<T> {
    inputs: Vec<Tensor<T>>,
    pre: Vec<Tensor<T>>,
}

fn trunk_forward<T: Real>(
    params: &ParamStore<T>,
    layers: &[LayerSpec],
    x: Tensor<T>,
) -> Result<(Tensor<T>, TrunkCache<T>)> {
    let mut cache = TrunkCache {
        inputs: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
    };
    let mut h = x;
    for layer in layers {
        let pre = affine_forward(&h, params.get(&layer.weight())?, params.get(&layer.bias())?)?;
        let next = relu(&pre);
        cache.inputs.push(h);
        cache.pre.push(pre);
        h = next;
    }
    Ok((h, cache))
}

fn layer_backward<T: Real>(
    params: &mut ParamStore<T>,
    layer: &LayerSpec,
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    want_grad_x: bool,
) -> Result<Option<Tensor<T>>> {
    let (w, b) = params.pair_mut(&layer.weight(), &layer.bias())?;
    affine_backward_into(grad_out, input, &w.value, &mut w.grad, &mut b.grad, want_grad_x)
}

fn trunk_backward<T: Real>(
    params: &mut ParamStore<T>,
    layers: &[LayerSpec],
    cache: &TrunkCache<T>,
    grad_h: Tensor<T>,
    want_input_grad: bool,
) -> Result<Option<Tensor<T>>> {
    let mut g = grad_h;
    for (l, layer) in layers.iter().enumerate().rev() {
        let g_pre = relu_backward(&g, &cache.pre[l])?;
        let want = l > 0 || want_input_grad;
        match layer_backward(params, layer, &g_pre, &cache.inputs[l], want)? {
            Some(next) => g = next,
            None => return Ok(None),
        }
    }
    Ok(Some(g))
}

fn check_labels<T: Real>(cfg: &ModelConfig, x: &Tensor<T>, y: Option<&[Tensor<T>]>) -> Result<()> {
    let (rows, d) = x.dims2()?;
    if d != cfg.obs_dim {
        return Err(Error::dim("encode input", x.shape(), &[rows, cfg.obs_dim]));
    }
    match (cfg.is_labeled(), y) {
        (false, None) => Ok(()),
        (false, Some(_)) => Err(Error::Config("labels given to an unlabeled model".into())),
        (true, None) => Err(Error::Config("labeled model requires labels".into())),
        (true, Some(ys)) => {
            if ys.len() != cfg.num_labels() {
                return Err(Error::Config(format!(
                    "expected {} label matrices, got {}",
                    cfg.num_labels(),
                    ys.len()
                )));
            }
            for (y, &p) in ys.iter().zip(&cfg.label_dims) {
                if y.shape() != [rows, p] {
                    return Err(Error::dim("encode labels", y.shape(), &[rows, p]));
                }
            }
            Ok(())
        }
    }
}

/// Activations kept by [`encode_cached`] for [`encoder_backward`].
pub struct EncoderCache<T = f32> {
    trunk: TrunkCache<T>,
    hidden: Tensor<T>,
    raw_logvar: Tensor<T>,
}

pub fn encode_cached<T: Real>(
    params: &ParamStore<T>,
    cfg: &ModelConfig,
    x: &Tensor<T>,
    y: Option<&[Tensor<T>]>,
) -> Result<(LatentCode<T>, EncoderCache<T>)> {
    check_labels(cfg, x, y)?;
    let input = match y {
        Some(ys) if !ys.is_empty() => {
            let mut parts = vec![x];
            parts.extend(ys.iter());
            Tensor::hcat(&parts)?
        }
        _ => x.clone(),
    };
    let layers = cfg.encoder_layers();
    let (trunk_layers, head) = layers.split_at(layers.len() - 1);
    let (hidden, trunk) = trunk_forward(params, trunk_layers, input)?;
    let head = &head[0];
    let out = affine_forward(&hidden, params.get(&head.weight())?, params.get(&head.bias())?)?;
    let k = cfg.latent_dim;
    let mu = out.cols_range(0, k);
    let raw_logvar = out.cols_range(k, 2 * k);
    let [lo, hi] = cfg.logvar_clamp;
    let (lo, hi) = (T::from_f64(lo), T::from_f64(hi));
    let logvar = raw_logvar.map(|v| v.max(lo).min(hi));
    Ok((
        LatentCode { mu, logvar },
        EncoderCache {
            trunk,
            hidden,
            raw_logvar,
        },
    ))
}

/// Posterior parameters for `x` (and its labels when the model is labeled).
pub fn encode<T: Real>(
    params: &ParamStore<T>,
    cfg: &ModelConfig,
    x: &Tensor<T>,
    y: Option<&[Tensor<T>]>,
) -> Result<LatentCode<T>> {
    encode_cached(params, cfg, x, y).map(|(code, _)| code)
}

/// Accumulates encoder parameter gradients given `dL/dmu` and `dL/dlogvar`
/// (the latter with respect to the clamped value).
pub fn encoder_backward<T: Real>(
    params: &mut ParamStore<T>,
    cfg: &ModelConfig,
    cache: &EncoderCache<T>,
    grad_mu: &Tensor<T>,
    grad_logvar: &Tensor<T>,
) -> Result<()> {
    let [lo, hi] = cfg.logvar_clamp;
    let (lo, hi) = (T::from_f64(lo), T::from_f64(hi));
    let rows = grad_mu.rows();
    let k = cfg.latent_dim;
    if grad_mu.shape() != [rows, k] || grad_logvar.shape() != [rows, k] {
        return Err(Error::dim("encoder_backward", grad_mu.shape(), grad_logvar.shape()));
    }
    let mut g_out = Tensor::zeros(&[rows, 2 * k]);
    for i in 0..rows {
        let row = g_out.row_mut(i);
        row[..k].copy_from_slice(grad_mu.row(i));
        for (j, (&g, &raw)) in grad_logvar.row(i).iter().zip(cache.raw_logvar.row(i)).enumerate() {
            row[k + j] = if raw >= lo && raw <= hi { g } else { T::zero() };
        }
    }
    let layers = cfg.encoder_layers();
    let (trunk_layers, head) = layers.split_at(layers.len() - 1);
    let g_hidden = layer_backward(params, &head[0], &g_out, &cache.hidden, true)?
        .expect("requested");
    trunk_backward(params, trunk_layers, &cache.trunk, g_hidden, false)?;
    Ok(())
}

/// `z = mu + exp(logvar / 2) ⊙ eps`.
pub fn reparameterize<T: Real>(code: &LatentCode<T>, eps: &Tensor<T>) -> Result<Tensor<T>> {
    if eps.shape() != code.mu.shape() {
        return Err(Error::dim("reparameterize", eps.shape(), code.mu.shape()));
    }
    let half = T::from_f64(0.5);
    let data = code
        .mu
        .data()
        .iter()
        .zip(code.logvar.data())
        .zip(eps.data())
        .map(|((&m, &lv), &e)| m + (half * lv).exp() * e)
        .collect();
    Tensor::new(code.mu.shape(), data)
}

pub struct DecoderCache<T = f32> {
    trunk: TrunkCache<T>,
    hidden: Tensor<T>,
}

pub fn decode_cached<T: Real>(
    params: &ParamStore<T>,
    cfg: &ModelConfig,
    z: &Tensor<T>,
) -> Result<(DecoderOutput<T>, DecoderCache<T>)> {
    let (rows, k) = z.dims2()?;
    if k != cfg.latent_dim {
        return Err(Error::dim("decode", z.shape(), &[rows, cfg.latent_dim]));
    }
    let (hidden, trunk) = trunk_forward(params, &cfg.decoder_trunk(), z.clone())?;
    let head = |spec: &LayerSpec| -> Result<Tensor<T>> {
        affine_forward(&hidden, params.get(&spec.weight())?, params.get(&spec.bias())?)
    };
    let pixel_logits = head(&cfg.pixel_head())?;
    let label_logits = cfg.label_heads().iter().map(head).collect::<Result<Vec<_>>>()?;
    Ok((
        DecoderOutput {
            pixel_logits,
            label_logits,
        },
        DecoderCache { trunk, hidden },
    ))
}

pub fn decode<T: Real>(params: &ParamStore<T>, cfg: &ModelConfig, z: &Tensor<T>) -> Result<DecoderOutput<T>> {
    decode_cached(params, cfg, z).map(|(out, _)| out)
}

/// Accumulates decoder parameter gradients and returns `dL/dz`.
pub fn decoder_backward<T: Real>(
    params: &mut ParamStore<T>,
    cfg: &ModelConfig,
    cache: &DecoderCache<T>,
    grad_pixels: &Tensor<T>,
    grad_labels: &[Tensor<T>],
) -> Result<Tensor<T>> {
    if grad_labels.len() != cfg.num_labels() {
        return Err(Error::Config("one label gradient per label head".into()));
    }
    let mut g_hidden = layer_backward(params, &cfg.pixel_head(), grad_pixels, &cache.hidden, true)?
        .expect("requested");
    for (spec, g) in cfg.label_heads().iter().zip(grad_labels) {
        let gh = layer_backward(params, spec, g, &cache.hidden, true)?.expect("requested");
        g_hidden.add_assign(&gh)?;
    }
    Ok(trunk_backward(params, &cfg.decoder_trunk(), &cache.trunk, g_hidden, true)?
        .expect("requested"))
}

/// Glorot-uniform weights, zero biases, fully determined by `seed`.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamStore<f32>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for layer in cfg.all_layers() {
        let a = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt() as f32;
        let w: Vec<f32> = (0..layer.fan_in * layer.fan_out)
            .map(|_| rng.random_range(-a..a))
            .collect();
        store.insert(layer.weight(), Tensor::new(&[layer.fan_in, layer.fan_out], w)?);
        store.insert(layer.bias(), Tensor::zeros(&[layer.fan_out]));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(cfg: &ModelConfig) -> ParamStore<f32> {
        let mut p = init_params(cfg, 0).unwrap();
        for (_, param) in p.iter_mut() {
            param.value.fill(0.0);
        }
        p
    }

    fn onehots(rows: usize, p: usize) -> Tensor<f32> {
        let mut t = Tensor::zeros(&[rows, p]);
        for i in 0..rows {
            t.row_mut(i)[i % p] = 1.0;
        }
        t
    }

    #[test]
    fn zero_parameters_give_prior_code_and_half_probability_pixels() {
        let cfg = ModelConfig::wela(10, 3, 2, 5.0, 1.0).with_hidden(8);
        let p = zero_params(&cfg);
        let x = Tensor::full(&[4, 10], 0.7);
        let ys = [onehots(4, 3), onehots(4, 3)];
        let code = encode(&p, &cfg, &x, Some(&ys)).unwrap();
        assert!(code.mu.data().iter().chain(code.logvar.data()).all(|&v| v == 0.0));
        let out = decode(&p, &cfg, &code.mu).unwrap();
        assert!(out.pixel_logits.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.label_logits.len(), 2);
        assert!(out.label_logits.iter().all(|t| t.shape() == [4, 3]));
    }

    #[test]
    fn unlabeled_decoder_has_no_label_heads() {
        let cfg = ModelConfig::tcvae(6, 2, 1.0).with_hidden(4);
        let p = init_params(&cfg, 1).unwrap();
        let out = decode(&p, &cfg, &Tensor::zeros(&[3, 2])).unwrap();
        assert!(out.label_logits.is_empty());
        assert_eq!(out.pixel_logits.shape(), &[3, 6]);
    }

    #[test]
    fn label_presence_must_match_config() {
        let wela = ModelConfig::wela(6, 2, 1, 2.0, 1.0).with_hidden(4);
        let tc = ModelConfig::tcvae(6, 1, 1.0).with_hidden(4);
        let x = Tensor::zeros(&[2, 6]);
        let y = [onehots(2, 2)];
        assert!(matches!(
            encode(&init_params(&wela, 0).unwrap(), &wela, &x, None),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            encode(&init_params(&tc, 0).unwrap(), &tc, &x, Some(&y)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reparameterize_cases() {
        let code = LatentCode {
            mu: Tensor::<f32>::from_rows(&[&[0.5, -1.0]]).unwrap(),
            logvar: Tensor::zeros(&[1, 2]),
        };
        let z0 = reparameterize(&code, &Tensor::zeros(&[1, 2])).unwrap();
        assert_eq!(z0, code.mu);
        let z1 = reparameterize(&code, &Tensor::full(&[1, 2], 1.0)).unwrap();
        assert_eq!(z1.data(), &[1.5, 0.0]);
        assert!(reparameterize(&code, &Tensor::zeros(&[2, 2])).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::tcvae(16, 2, 1.0).with_hidden(32);
        assert_eq!(init_params(&cfg, 9).unwrap(), init_params(&cfg, 9).unwrap());
        assert_ne!(init_params(&cfg, 9).unwrap(), init_params(&cfg, 10).unwrap());
    }

    #[test]
    fn init_variance_matches_uniform_moment() {
        let cfg = ModelConfig::wela(256, 3, 2, 40.0, 1.0).with_hidden(200);
        let p = init_params(&cfg, 3).unwrap();
        for layer in cfg.all_layers() {
            let w = p.get(&layer.weight()).unwrap().data();
            let a = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            let mean = w.iter().map(|&v| v as f64).sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / w.len() as f64;
            let expect = a * a / 3.0;
            assert!((var - expect).abs() < 0.2 * expect, "{} var {var} vs {expect}", layer.name);
            assert!(p.get(&layer.bias()).unwrap().data().iter().all(|&b| b == 0.0));
        }
        assert_eq!(p.num_scalars(), cfg.num_params());
    }

    #[test]
    fn random_round_trip_is_finite_and_keeps_batch() {
        let cfg = ModelConfig::tcvae(64, 3, 1.0).with_hidden(32);
        let p = init_params(&cfg, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::new(&[7, 64], (0..7 * 64).map(|_| rng.random::<f32>()).collect()).unwrap();
        let code = encode(&p, &cfg, &x, None).unwrap();
        let out = decode(&p, &cfg, &code.mu).unwrap();
        assert_eq!(out.pixel_logits.rows(), 7);
        assert!(code.mu.is_finite() && code.logvar.is_finite() && out.pixel_logits.is_finite());
    }
}
