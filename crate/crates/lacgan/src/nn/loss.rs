//! Loss functions: classification cross-entropy and the source (real/fake)
//! adversarial cost, with their gradients w.r.t. the network outputs.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Probabilities below this are clamped before any log.
pub const LOG_CLAMP: f64 = 1e-12;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

fn check_one_hot(y: &Mat) -> Result<()> {
    for i in 0..y.rows() {
        let row = y.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::Validation(format!(
                "label row {i} is not one-hot: {row:?}"
            )));
        }
    }
    Ok(())
}

/// Mean over the batch of `-sum_j y_j log p_j`, with log clamped at 1e-12.
pub fn cross_entropy(p: &Mat, y: &Mat) -> Result<f64> {
    if p.rows() != y.rows() || p.cols() != y.cols() {
        return Err(Error::dim(
            "cross_entropy shapes",
            format!("{}x{}", p.rows(), p.cols()),
            format!("{}x{}", y.rows(), y.cols()),
        ));
    }
    check_one_hot(y)?;
    let mut total = 0.0;
    for i in 0..p.rows() {
        for (pj, yj) in p.row(i).iter().zip(y.row(i)) {
            if *yj == 1.0 {
                total -= pj.max(LOG_CLAMP).ln();
            }
        }
    }
    Ok(total / p.rows() as f64)
}

/// Gradient of [`cross_entropy`] w.r.t. the predictions `p`.
/// Zero where the clamp is active.
pub fn cross_entropy_grad(p: &Mat, y: &Mat) -> Result<Mat> {
    check_one_hot(y)?;
    let n = p.rows() as f64;
    let mut dp = Mat::zeros(p.rows(), p.cols());
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            if y.get(i, j) == 1.0 && p.get(i, j) > LOG_CLAMP {
                dp.set(i, j, -1.0 / (p.get(i, j) * n));
            }
        }
    }
    Ok(dp)
}

/// Source cost J_S = -1/2 mean(log D(real)) - 1/2 mean(log(1 - D(fake)))
/// and the generator cost J_G = -J_S. Inputs are clamped into
/// [1e-12, 1-1e-12] before the logs.
pub fn adversarial_losses(d_real: &[f64], d_fake: &[f64]) -> (f64, f64) {
    let real_term: f64 = d_real.iter().map(|&d| clamp_prob(d).ln()).sum::<f64>()
        / d_real.len().max(1) as f64;
    let fake_term: f64 = d_fake
        .iter()
        .map(|&d| (1.0 - clamp_prob(d)).ln())
        .sum::<f64>()
        / d_fake.len().max(1) as f64;
    let j_s = -0.5 * real_term - 0.5 * fake_term;
    (j_s, -j_s)
}

/// dJ_S/d(d_real_i); zero where the clamp is active.
pub fn adversarial_grad_real(d_real: &[f64]) -> Vec<f64> {
    let n = d_real.len() as f64;
    d_real
        .iter()
        .map(|&d| {
            if (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&d) {
                -1.0 / (2.0 * n * d)
            } else {
                0.0
            }
        })
        .collect()
}

/// dJ_S/d(d_fake_i); zero where the clamp is active.
pub fn adversarial_grad_fake(d_fake: &[f64]) -> Vec<f64> {
    let n = d_fake.len() as f64;
    d_fake
        .iter()
        .map(|&d| {
            if (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&d) {
                1.0 / (2.0 * n * (1.0 - d))
            } else {
                0.0
            }
        })
        .collect()
}
