use serde::{Deserialize, Serialize};

use super::MlpParams;
use crate::error::{Error, Result};

/// Adam hyperparameters. Weight decay is the classic L2 form: `wd * theta`
/// is added to the gradient before the moment updates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-3,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        let n = params.as_slice().len();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(
        &mut self,
        params: &mut MlpParams,
        grads: &MlpParams,
        cfg: &AdamConfig,
    ) -> Result<()> {
        let n = params.as_slice().len();
        if grads.as_slice().len() != n || self.m.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "Adam state for {} parameters, got params {n} and grads {}",
                self.m.len(),
                grads.as_slice().len()
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let correction1 = 1.0 - cfg.beta1.powi(t);
        let correction2 = 1.0 - cfg.beta2.powi(t);
        let iter = params
            .as_mut_slice()
            .iter_mut()
            .zip(grads.as_slice())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()));
        for ((theta, &g), (m, v)) in iter {
            let g = g + cfg.weight_decay * *theta;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        Ok(())
    }
}
