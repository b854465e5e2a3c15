use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Observation dimension D (pixels).
    pub obs_dim: usize,
    /// Latent dimension K.
    pub latent_dim: usize,
    /// One entry per weak label: its number of classes p_j. Empty for TCVAE.
    pub label_dims: Vec<usize>,
    pub hidden: usize,
    pub hidden_layers: usize,
    /// Label reconstruction weight γ.
    pub gamma: f64,
    /// Total-correlation weight β.
    pub beta: f64,
    pub logvar_clamp: [f64; 2],
}

/// Shape of one affine layer and the names of its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl LayerSpec {
    fn new(name: impl Into<String>, fan_in: usize, fan_out: usize) -> Self {
        Self {
            name: name.into(),
            fan_in,
            fan_out,
        }
    }

    pub fn weight(&self) -> String {
        format!("{}.w", self.name)
    }

    pub fn bias(&self) -> String {
        format!("{}.b", self.name)
    }

    pub fn num_params(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }
}

impl ModelConfig {
    pub const HIDDEN: usize = 1200;
    pub const HIDDEN_LAYERS: usize = 2;
    pub const LOGVAR_CLAMP: [f64; 2] = [-8.0, 8.0];

    /// The unlabeled baseline.
    pub fn tcvae(obs_dim: usize, latent_dim: usize, beta: f64) -> Self {
        Self {
            obs_dim,
            latent_dim,
            label_dims: Vec::new(),
            hidden: Self::HIDDEN,
            hidden_layers: Self::HIDDEN_LAYERS,
            gamma: 1.0,
            beta,
            logvar_clamp: Self::LOGVAR_CLAMP,
        }
    }

    /// WeLa-VAE with `m` labels of `p` classes each and one latent channel per label.
    pub fn wela(obs_dim: usize, p: usize, m: usize, gamma: f64, beta: f64) -> Self {
        Self {
            obs_dim,
            latent_dim: m,
            label_dims: vec![p; m],
            hidden: Self::HIDDEN,
            hidden_layers: Self::HIDDEN_LAYERS,
            gamma,
            beta,
            logvar_clamp: Self::LOGVAR_CLAMP,
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    /// Number of weak labels m.
    pub fn num_labels(&self) -> usize {
        self.label_dims.len()
    }

    pub fn is_labeled(&self) -> bool {
        !self.label_dims.is_empty()
    }

    /// Encoder input width: D plus all label widths.
    pub fn encoder_input_dim(&self) -> usize {
        self.obs_dim + self.label_dims.iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.hidden == 0 || self.hidden_layers == 0 {
            return Err(Error::Config("obs_dim, hidden and hidden_layers must be positive".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::Config("latent dimension K must be >= 1".into()));
        }
        if self.label_dims.iter().any(|&p| p < 2) {
            return Err(Error::Config(format!("label widths {:?} must be >= 2", self.label_dims)));
        }
        if self.is_labeled() && !(self.gamma >= 1.0) {
            return Err(Error::Config(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        let [lo, hi] = self.logvar_clamp;
        if !(lo < hi) {
            return Err(Error::Config(format!("logvar clamp [{lo}, {hi}] is empty")));
        }
        Ok(())
    }

    /// Labeled models use exactly one latent channel per label.
    pub fn validate_latent_matches_labels(&self) -> Result<()> {
        if self.is_labeled() && self.latent_dim != self.num_labels() {
            return Err(Error::Config(format!(
                "labeled models need K = m, got K={} and m={}",
                self.latent_dim,
                self.num_labels()
            )));
        }
        Ok(())
    }

    pub fn encoder_layers(&self) -> Vec<LayerSpec> {
        let mut layers = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.encoder_input_dim();
        for l in 0..self.hidden_layers {
            layers.push(LayerSpec::new(format!("enc.h{l}"), fan_in, self.hidden));
            fan_in = self.hidden;
        }
        layers.push(LayerSpec::new("enc.head", fan_in, 2 * self.latent_dim));
        layers
    }

    /// Hidden trunk layers of the decoder.
    pub fn decoder_trunk(&self) -> Vec<LayerSpec> {
        let mut fan_in = self.latent_dim;
        (0..self.hidden_layers)
            .map(|l| {
                let spec = LayerSpec::new(format!("dec.h{l}"), fan_in, self.hidden);
                fan_in = self.hidden;
                spec
            })
            .collect()
    }

    pub fn pixel_head(&self) -> LayerSpec {
        LayerSpec::new("dec.pixels", self.hidden, self.obs_dim)
    }

    pub fn label_heads(&self) -> Vec<LayerSpec> {
        self.label_dims
            .iter()
            .enumerate()
            .map(|(j, &p)| LayerSpec::new(format!("dec.label{j}"), self.hidden, p))
            .collect()
    }

    /// Every layer in initialization order.
    pub fn all_layers(&self) -> Vec<LayerSpec> {
        let mut v = self.encoder_layers();
        v.extend(self.decoder_trunk());
        v.push(self.pixel_head());
        v.extend(self.label_heads());
        v
    }

    pub fn num_params(&self) -> usize {
        self.all_layers().iter().map(LayerSpec::num_params).sum()
    }
}
