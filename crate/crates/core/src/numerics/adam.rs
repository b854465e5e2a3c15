use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f32) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
struct Moments {
    first: Vec<f32>,
    second: Vec<f32>,
}

/// First/second moment accumulators keyed by parameter name.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    t: u64,
    moments: BTreeMap<String, Moments>,
}

impl AdamState {
    /// State with no accumulators; [`adam_step`] rejects it until
    /// [`AdamState::init`] has been called.
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            moments: BTreeMap::new(),
        }
    }

    /// Zero accumulators shaped like every parameter in `params`.
    pub fn for_params(params: &ParamStore<f32>, config: AdamConfig) -> Self {
        let mut s = Self::new(config);
        s.init(params);
        s
    }

    pub fn init(&mut self, params: &ParamStore<f32>) {
        self.t = 0;
        self.moments = params
            .iter()
            .map(|(name, p)| {
                let n = p.value.len();
                (
                    name.to_string(),
                    Moments {
                        first: vec![0.0; n],
                        second: vec![0.0; n],
                    },
                )
            })
            .collect();
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of every parameter, in place.
///
/// Gradients are left untouched; the caller zeroes them.
pub fn adam_step(params: &mut ParamStore<f32>, state: &mut AdamState) -> Result<()> {
    for (name, p) in params.iter() {
        match state.moments.get(name) {
            Some(m) if m.first.len() == p.value.len() => {}
            _ => return Err(Error::Uninitialized(name.to_string())),
        }
    }
    state.t += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.t as i32;
    let bc1 = (1.0 - (beta1 as f64).powi(t)) as f32;
    let bc2 = (1.0 - (beta2 as f64).powi(t)) as f32;
    for (name, p) in params.iter_mut() {
        let m = state.moments.get_mut(name).expect("checked above");
        let grads = p.grad.data();
        for (((w, &g), m1), m2) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(grads)
            .zip(m.first.iter_mut())
            .zip(m.second.iter_mut())
        {
            *m1 = beta1 * *m1 + (1.0 - beta1) * g;
            *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
            let m_hat = *m1 / bc1;
            let v_hat = *m2 / bc2;
            *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
