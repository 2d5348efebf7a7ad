//! Finite-difference verification drivers for the three networks.
//!
//! Each driver builds a deterministic scalar loss over a random mini-batch,
//! computes the analytic gradient via backprop, and hands both to the
//! generic checker. Dropout in the discriminator is made repeatable by
//! reseeding its mask stream on every loss evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{NUM_CLASSES, RAW_DIM};
use crate::error::Result;
use crate::mat::Mat;
use crate::model::{infer_rng, sample_latent, split_heads, LacGanModel, DEFAULT_LAMBDA};
use crate::nn::gradcheck::{check_gradients, GradCheckReport, DEFAULT_FD_STEP};
use crate::nn::loss::{adversarial_grad_real, cross_entropy, cross_entropy_grad, LOG_CLAMP};
use crate::nn::{Mode, Network};

/// Gradient-check result for one named network.
#[derive(Debug, Clone)]
pub struct NetworkReport {
    pub name: &'static str,
    pub report: GradCheckReport,
}

/// Run the finite-difference check on E, G, and D for one seed and BN
/// placement. `perturb` is added to every analytic gradient coordinate of
/// the extractor; nonzero values must make the check fail (detector sanity
/// hook).
pub fn network_reports(
    pa: bool,
    seed: u64,
    samples_per_tensor: usize,
    perturb: f64,
) -> Result<Vec<NetworkReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LacGanModel::new(pa, DEFAULT_LAMBDA, &mut rng);
    let batch = 6;

    let mut x_raw = Mat::zeros(batch, RAW_DIM);
    for v in x_raw.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut y = Mat::zeros(batch, NUM_CLASSES);
    for i in 0..batch {
        let k = rng.gen_range(0..NUM_CLASSES);
        y.set(i, k, 1.0);
    }

    let mut reports = Vec::with_capacity(3);

    // --- Extractor: cross-entropy on the class output ---
    {
        let loss = |net: &Network| -> Result<f64> {
            let mut r = infer_rng();
            let (p, _) = net.forward(&x_raw, Mode::Train, &mut r)?;
            cross_entropy(&p, &y)
        };
        let mut r = infer_rng();
        let (p, cache) = model.e.net.forward(&x_raw, Mode::Train, &mut r)?;
        let dp = cross_entropy_grad(&p, &y)?;
        let (grads, _) = model.e.net.backward(&cache, &dp)?;
        let mut analytic = grads.flatten(&model.e.net);
        for a in &mut analytic {
            *a += perturb;
        }
        let report = check_gradients(
            &model.e.net,
            &analytic,
            &loss,
            samples_per_tensor,
            DEFAULT_FD_STEP,
            &mut rng,
        )?;
        reports.push(NetworkReport { name: "E", report });
    }

    // --- Generator: random linear functional of the tanh output ---
    {
        let (z, c) = sample_latent(&mut rng, batch);
        let input = z.hconcat(&c)?;
        let mut weights = Mat::zeros(batch, model.g.net.output_dim());
        for v in weights.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let n = (batch * model.g.net.output_dim()) as f64;
        let loss = |net: &Network| -> Result<f64> {
            let mut r = infer_rng();
            let (out, _) = net.forward(&input, Mode::Train, &mut r)?;
            let dot: f64 = out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
            Ok(dot / n)
        };
        let mut r = infer_rng();
        let (_, cache) = model.g.net.forward(&input, Mode::Train, &mut r)?;
        let upstream = weights.map(|v| v / n);
        let (grads, _) = model.g.net.backward(&cache, &upstream)?;
        let analytic = grads.flatten(&model.g.net);
        let report = check_gradients(
            &model.g.net,
            &analytic,
            &loss,
            samples_per_tensor,
            DEFAULT_FD_STEP,
            &mut rng,
        )?;
        reports.push(NetworkReport { name: "G", report });
    }

    // --- Discriminator: real-batch source cost plus weighted class cost ---
    {
        let mut x = Mat::zeros(batch, model.d.net.input_dim());
        for v in x.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mask_seed = seed.wrapping_add(0x5eed);
        let lambda = model.lambda;
        let loss = |net: &Network| -> Result<f64> {
            // Reseed the dropout mask stream so every FD evaluation sees the
            // same masks.
            let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
            let (out, _) = net.forward(&x, Mode::Train, &mut r)?;
            let (d_src, p_class) = split_heads(&out);
            let j_src = -d_src
                .iter()
                .map(|d| d.max(LOG_CLAMP).ln())
                .sum::<f64>()
                / (2.0 * batch as f64);
            Ok(j_src + lambda * cross_entropy(&p_class, &y)?)
        };
        let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
        let (out, cache) = model.d.net.forward(&x, Mode::Train, &mut r)?;
        let (d_src, p_class) = split_heads(&out);
        let src_grad = adversarial_grad_real(&d_src);
        let class_grad = cross_entropy_grad(&p_class, &y)?;
        let mut upstream = Mat::zeros(batch, 1 + NUM_CLASSES);
        for i in 0..batch {
            upstream.set(i, 0, src_grad[i]);
            for j in 0..NUM_CLASSES {
                upstream.set(i, j + 1, lambda * class_grad.get(i, j));
            }
        }
        let (grads, _) = model.d.net.backward(&cache, &upstream)?;
        let analytic = grads.flatten(&model.d.net);
        let report = check_gradients(
            &model.d.net,
            &analytic,
            &loss,
            samples_per_tensor,
            DEFAULT_FD_STEP,
            &mut rng,
        )?;
        reports.push(NetworkReport { name: "D", report });
    }

    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::DEFAULT_TOLERANCE;

    #[test]
    fn all_networks_pass_both_placements() {
        for pa in [true, false] {
            for report in network_reports(pa, 42, 3, 0.0).unwrap() {
                assert!(
                    report.report.max_rel_err < DEFAULT_TOLERANCE,
                    "{} (pa={pa}) max rel err {}",
                    report.name,
                    report.report.max_rel_err
                );
            }
        }
    }

    #[test]
    fn perturbed_gradient_is_detected() {
        let reports = network_reports(true, 42, 3, 0.05).unwrap();
        let e = reports.iter().find(|r| r.name == "E").unwrap();
        assert!(e.report.max_rel_err > DEFAULT_TOLERANCE);
    }
}
