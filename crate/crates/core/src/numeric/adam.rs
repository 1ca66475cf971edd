use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::params::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for every tensor of a parameter set, in
/// the set's canonical tensor order.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl AdamState {
    pub fn new<P: ParamSet + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let shapes: Vec<_> = params.tensors().iter().map(|(_, t)| t.shape()).collect();
        AdamState {
            config,
            m: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected ADAM update of `params` along `grads`.
    pub fn step<P: ParamSet + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if grads.len() != params.len() || params.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "adam: {} params, {} grads, {} moment tensors",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, ((name, p), (_, g))) in params.iter().zip(&grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::invalid(format!(
                    "adam: shape mismatch on {name}: param {:?}, grad {:?}, moment {:?}",
                    p.shape(),
                    g.shape(),
                    self.m[i].shape()
                )));
            }
        }
        self.t += 1;
        for (i, (_, p)) in params.iter_mut().enumerate() {
            adam_update(
                p.as_mut_slice(),
                grads[i].1.as_slice(),
                self.m[i].as_mut_slice(),
                self.v[i].as_mut_slice(),
                self.t,
                &self.config,
            );
        }
        Ok(())
    }
}

/// Elementwise ADAM update at step `t >= 1`.
pub fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &AdamConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}
