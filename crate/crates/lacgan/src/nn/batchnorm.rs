//! Batch normalization with train/inference modes and running statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNormParams {
    pub fn new(dim: usize) -> Self {
        BatchNormParams {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// Everything backward needs, plus the running-stat update computed in
/// train mode. The update is NOT applied by the forward pass; the caller
/// commits it with [`commit_running_stats`] after an optimizer step so
/// that pure evaluations (finite differences, frozen networks) leave the
/// parameters untouched.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub x_hat: Mat,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub mode: Mode,
}

pub fn batchnorm_forward(x: &Mat, p: &BatchNormParams, mode: Mode) -> Result<(Mat, BnCache)> {
    if x.cols() != p.dim() {
        return Err(Error::dim("batchnorm width", x.cols(), p.dim()));
    }
    let n = x.rows();
    let d = x.cols();
    let (mean, var) = match mode {
        Mode::Train => {
            if n < 2 {
                return Err(Error::Validation(format!(
                    "batchnorm train mode requires batch >= 2, got {n}"
                )));
            }
            let mut mean = vec![0.0; d];
            for i in 0..n {
                for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= n as f64;
            }
            let mut var = vec![0.0; d];
            for i in 0..n {
                for j in 0..d {
                    let c = x.get(i, j) - mean[j];
                    var[j] += c * c;
                }
            }
            for v in &mut var {
                *v /= n as f64; // biased variance, as in the original BN formulation
            }
            (mean, var)
        }
        Mode::Infer => (p.running_mean.clone(), p.running_var.clone()),
    };

    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + p.eps).sqrt()).collect();
    let mut x_hat = Mat::zeros(n, d);
    let mut y = Mat::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let xh = (x.get(i, j) - mean[j]) * inv_std[j];
            x_hat.set(i, j, xh);
            y.set(i, j, p.gamma[j] * xh + p.beta[j]);
        }
    }
    let cache = BnCache {
        x_hat,
        inv_std,
        batch_mean: mean,
        batch_var: var,
        mode,
    };
    Ok((y, cache))
}

/// Fold the batch statistics from a train-mode forward into the running stats.
pub fn commit_running_stats(p: &mut BatchNormParams, cache: &BnCache) {
    debug_assert_eq!(cache.mode, Mode::Train);
    let m = p.momentum;
    for j in 0..p.dim() {
        p.running_mean[j] = m * p.running_mean[j] + (1.0 - m) * cache.batch_mean[j];
        p.running_var[j] = m * p.running_var[j] + (1.0 - m) * cache.batch_var[j];
    }
}

/// Returns (dgamma, dbeta, dx).
pub fn batchnorm_backward(
    p: &BatchNormParams,
    cache: &BnCache,
    dy: &Mat,
) -> (Vec<f64>, Vec<f64>, Mat) {
    let n = dy.rows();
    let d = dy.cols();
    let mut dgamma = vec![0.0; d];
    let mut dbeta = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            let g = dy.get(i, j);
            dgamma[j] += g * cache.x_hat.get(i, j);
            dbeta[j] += g;
        }
    }
    let mut dx = Mat::zeros(n, d);
    match cache.mode {
        Mode::Train => {
            // dx = gamma*inv_std/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
            let mut sum_dxhat = vec![0.0; d];
            let mut sum_dxhat_xhat = vec![0.0; d];
            for i in 0..n {
                for j in 0..d {
                    let dxhat = dy.get(i, j) * p.gamma[j];
                    sum_dxhat[j] += dxhat;
                    sum_dxhat_xhat[j] += dxhat * cache.x_hat.get(i, j);
                }
            }
            for i in 0..n {
                for j in 0..d {
                    let dxhat = dy.get(i, j) * p.gamma[j];
                    let v = (n as f64 * dxhat
                        - sum_dxhat[j]
                        - cache.x_hat.get(i, j) * sum_dxhat_xhat[j])
                        * cache.inv_std[j]
                        / n as f64;
                    dx.set(i, j, v);
                }
            }
        }
        Mode::Infer => {
            // Running stats are constants here.
            for i in 0..n {
                for j in 0..d {
                    dx.set(i, j, dy.get(i, j) * p.gamma[j] * cache.inv_std[j]);
                }
            }
        }
    }
    (dgamma, dbeta, dx)
}
