//! Bias-corrected Adam over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1,
            beta2,
            eps_hat: ADAM_EPS,
        }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], s: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != s.m.len() {
        return Err(Error::dim(
            "adam_step lengths",
            params.len(),
            format!("grads {} / state {}", grads.len(), s.m.len()),
        ));
    }
    s.t += 1;
    let bc1 = 1.0 - s.beta1.powi(s.t as i32);
    let bc2 = 1.0 - s.beta2.powi(s.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        let m_hat = s.m[i] / bc1;
        let v_hat = s.v[i] / bc2;
        params[i] -= s.lr * m_hat / (v_hat.sqrt() + s.eps_hat);
    }
    Ok(())
}
