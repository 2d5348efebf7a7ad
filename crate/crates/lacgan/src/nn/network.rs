//! Feed-forward network assembled from dense layers with optional batch
//! normalization and dropout, supporting pre-activation and post-activation
//! BN placement.
//!
//! In pre-activation (PA) mode, BN standardizes each layer's *input* before
//! the affine transform. In post-activation mode, BN is applied to the
//! affine output before the nonlinearity. Dropout, where present, always
//! acts on the layer input (it replaces BN on the discriminator's first
//! layer).

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::activation::Activation;
use crate::nn::batchnorm::{
    batchnorm_backward, batchnorm_forward, commit_running_stats, BatchNormParams, BnCache, Mode,
};
use crate::nn::dense::{dense_backward, dense_forward, DenseParams};
use crate::nn::dropout::{dropout_backward, dropout_forward, DropoutSpec};

/// Blueprint for one layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batch_norm: bool,
    pub dropout: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub dense: DenseParams,
    pub bn: Option<BatchNormParams>,
    pub dropout: Option<DropoutSpec>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    pa_mode: bool,
    trained: bool,
}

/// Per-layer intermediates kept for the backward pass.
pub struct LayerCache {
    dense_input: Mat,
    bn: Option<BnCache>,
    mask: Option<Mat>,
    output: Mat,
}

pub struct NetCache {
    mode: Mode,
    layers: Vec<LayerCache>,
}

impl NetCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Post-nonlinearity output of layer `i` (the bottleneck extraction hook).
    pub fn layer_output(&self, i: usize) -> &Mat {
        &self.layers[i].output
    }
}

/// Parameter gradients, mirroring [`Network`] layer by layer.
pub struct LayerGrads {
    pub dw: Mat,
    pub db: Vec<f64>,
    pub dgamma: Option<Vec<f64>>,
    pub dbeta: Option<Vec<f64>>,
}

pub struct NetGrads {
    pub layers: Vec<LayerGrads>,
}

fn bn_dim(spec: &LayerSpec, pa_mode: bool) -> usize {
    if pa_mode {
        spec.in_dim
    } else {
        spec.out_dim
    }
}

impl Network {
    pub fn new(specs: &[LayerSpec], pa_mode: bool, mut rng: &mut dyn RngCore) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if i > 0 && specs[i - 1].out_dim != spec.in_dim {
                return Err(Error::dim(
                    format!("layer {i} input width"),
                    specs[i - 1].out_dim,
                    spec.in_dim,
                ));
            }
            let dense = match spec.activation {
                Activation::Relu => DenseParams::init_he(spec.out_dim, spec.in_dim, &mut rng),
                _ => DenseParams::init_xavier(spec.out_dim, spec.in_dim, &mut rng),
            };
            let bn = spec
                .batch_norm
                .then(|| BatchNormParams::new(bn_dim(spec, pa_mode)));
            let dropout = spec.dropout.map(DropoutSpec::new).transpose()?;
            layers.push(Layer {
                dense,
                bn,
                dropout,
                activation: spec.activation,
            });
        }
        Ok(Network {
            layers,
            pa_mode,
            trained: false,
        })
    }

    pub fn pa_mode(&self) -> bool {
        self.pa_mode
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].dense.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty network").dense.out_dim()
    }

    /// Layer widths as [input, out_0, out_1, ...].
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.dense.out_dim()));
        w
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Switch BN placement. Reinitializes BN parameters (their width depends
    /// on the placement), so this is only legal before training.
    pub fn set_pa_mode(&mut self, on: bool) -> Result<()> {
        if self.trained {
            return Err(Error::State(
                "cannot change BN placement after training has started".into(),
            ));
        }
        if on == self.pa_mode {
            return Ok(());
        }
        self.pa_mode = on;
        for layer in &mut self.layers {
            if layer.bn.is_some() {
                let dim = if on {
                    layer.dense.in_dim()
                } else {
                    layer.dense.out_dim()
                };
                layer.bn = Some(BatchNormParams::new(dim));
            }
        }
        Ok(())
    }

    pub fn forward(
        &self,
        x: &Mat,
        mode: Mode,
        mut rng: &mut dyn RngCore,
    ) -> Result<(Mat, NetCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("network input width", x.cols(), self.input_dim()));
        }
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut bn_cache = None;
            if self.pa_mode {
                if let Some(bn) = &layer.bn {
                    let (y, c) = batchnorm_forward(&h, bn, mode)?;
                    h = y;
                    bn_cache = Some(c);
                }
            }
            let mut mask = None;
            if let Some(spec) = layer.dropout {
                let (y, m) = dropout_forward(&h, spec, mode, &mut rng);
                h = y;
                mask = m;
            }
            let dense_input = h.clone();
            let mut z = dense_forward(&dense_input, &layer.dense)?;
            if !self.pa_mode {
                if let Some(bn) = &layer.bn {
                    let (y, c) = batchnorm_forward(&z, bn, mode)?;
                    z = y;
                    bn_cache = Some(c);
                }
            }
            let output = layer.activation.forward(&z);
            caches.push(LayerCache {
                dense_input,
                bn: bn_cache,
                mask,
                output: output.clone(),
            });
            h = output;
        }
        Ok((h, NetCache { mode, layers: caches }))
    }

    /// Reverse-mode pass. Returns parameter gradients and dL/d(input).
    pub fn backward(&self, cache: &NetCache, upstream: &Mat) -> Result<(NetGrads, Mat)> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::State("forward cache does not match network".into()));
        }
        let last = cache.layers.last().expect("nonempty cache");
        if upstream.rows() != last.output.rows() || upstream.cols() != last.output.cols() {
            return Err(Error::State(format!(
                "upstream gradient shape {}x{} does not match cached output {}x{}",
                upstream.rows(),
                upstream.cols(),
                last.output.rows(),
                last.output.cols()
            )));
        }
        let mut dy = upstream.clone();
        let mut grads = Vec::with_capacity(self.layers.len());
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let mut dz = layer.activation.backward(&lc.output, &dy);
            let mut dgamma = None;
            let mut dbeta = None;
            if !self.pa_mode {
                if let (Some(bn), Some(bc)) = (&layer.bn, &lc.bn) {
                    let (dg, db_, dx) = batchnorm_backward(bn, bc, &dz);
                    dgamma = Some(dg);
                    dbeta = Some(db_);
                    dz = dx;
                }
            }
            let (dw, db, mut dh) = dense_backward(&lc.dense_input, &layer.dense, &dz)?;
            if let Some(mask) = &lc.mask {
                dh = dropout_backward(&dh, mask);
            }
            if self.pa_mode {
                if let (Some(bn), Some(bc)) = (&layer.bn, &lc.bn) {
                    let (dg, db_, dx) = batchnorm_backward(bn, bc, &dh);
                    dgamma = Some(dg);
                    dbeta = Some(db_);
                    dh = dx;
                }
            }
            grads.push(LayerGrads {
                dw,
                db,
                dgamma,
                dbeta,
            });
            dy = dh;
        }
        grads.reverse();
        Ok((NetGrads { layers: grads }, dy))
    }

    /// Fold the batch statistics of a train-mode forward into the running
    /// stats. Call only for the network being optimized.
    pub fn commit_bn(&mut self, cache: &NetCache) {
        if cache.mode != Mode::Train {
            return;
        }
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers) {
            if let (Some(bn), Some(bc)) = (layer.bn.as_mut(), &lc.bn) {
                commit_running_stats(bn, bc);
            }
        }
    }

    /// Number of optimizable scalars (W, b, gamma, beta).
    pub fn param_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.dense.w.data().len()
                    + l.dense.b.len()
                    + l.bn.as_ref().map_or(0, |bn| 2 * bn.dim())
            })
            .sum()
    }

    /// Flatten optimizable parameters in a fixed order:
    /// per layer W (row-major), b, gamma, beta.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        for l in &self.layers {
            out.extend_from_slice(l.dense.w.data());
            out.extend_from_slice(&l.dense.b);
            if let Some(bn) = &l.bn {
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
        }
        out
    }

    /// Non-optimized BN state (running mean then running variance, per BN
    /// layer in order), for checkpointing.
    pub fn bn_state(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            if let Some(bn) = &l.bn {
                out.extend_from_slice(&bn.running_mean);
                out.extend_from_slice(&bn.running_var);
            }
        }
        out
    }

    pub fn set_bn_state(&mut self, flat: &[f64]) -> Result<()> {
        let expected: usize = self
            .layers
            .iter()
            .filter_map(|l| l.bn.as_ref())
            .map(|bn| 2 * bn.dim())
            .sum();
        if flat.len() != expected {
            return Err(Error::dim("set_bn_state length", flat.len(), expected));
        }
        let mut pos = 0;
        for l in &mut self.layers {
            if let Some(bn) = &mut l.bn {
                let d = bn.dim();
                bn.running_mean.copy_from_slice(&flat[pos..pos + d]);
                pos += d;
                bn.running_var.copy_from_slice(&flat[pos..pos + d]);
                pos += d;
            }
        }
        Ok(())
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_len() {
            return Err(Error::dim("set_flat_params length", flat.len(), self.param_len()));
        }
        let mut pos = 0;
        for l in &mut self.layers {
            let wlen = l.dense.w.data().len();
            l.dense.w.data_mut().copy_from_slice(&flat[pos..pos + wlen]);
            pos += wlen;
            let blen = l.dense.b.len();
            l.dense.b.copy_from_slice(&flat[pos..pos + blen]);
            pos += blen;
            if let Some(bn) = &mut l.bn {
                let d = bn.dim();
                bn.gamma.copy_from_slice(&flat[pos..pos + d]);
                pos += d;
                bn.beta.copy_from_slice(&flat[pos..pos + d]);
                pos += d;
            }
        }
        Ok(())
    }
}

impl NetGrads {
    /// Flatten in the same order as [`Network::flat_params`].
    pub fn flatten(&self, net: &Network) -> Vec<f64> {
        let mut out = Vec::with_capacity(net.param_len());
        for (g, l) in self.layers.iter().zip(net.layers()) {
            out.extend_from_slice(g.dw.data());
            out.extend_from_slice(&g.db);
            if l.bn.is_some() {
                out.extend_from_slice(g.dgamma.as_deref().unwrap_or(&[]));
                out.extend_from_slice(g.dbeta.as_deref().unwrap_or(&[]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::{cross_entropy, cross_entropy_grad};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_classifier(pa: bool, rng: &mut ChaCha8Rng) -> Network {
        Network::new(
            &[
                LayerSpec {
                    in_dim: 6,
                    out_dim: 5,
                    activation: Activation::Relu,
                    batch_norm: true,
                    dropout: None,
                },
                LayerSpec {
                    in_dim: 5,
                    out_dim: 3,
                    activation: Activation::Softmax,
                    batch_norm: false,
                    dropout: None,
                },
            ],
            pa,
            rng,
        )
        .unwrap()
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = small_classifier(false, &mut rng);
        let x = Mat::from_vec(4, 6, (0..24).map(|i| i as f64 * 0.1).collect()).unwrap();
        let (y, cache) = net.forward(&x, Mode::Train, &mut rng).unwrap();
        let zero = Mat::zeros(y.rows(), y.cols());
        let (grads, dx) = net.backward(&cache, &zero).unwrap();
        assert!(grads.flatten(&net).iter().all(|&g| g == 0.0));
        assert!(dx.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dense_softmax_ce_gradient_closed_form() {
        // Single dense + softmax + CE: dW must equal (p - y)^T x / batch.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::new(
            &[LayerSpec {
                in_dim: 4,
                out_dim: 3,
                activation: Activation::Softmax,
                batch_norm: false,
                dropout: None,
            }],
            false,
            &mut rng,
        )
        .unwrap();
        let x = Mat::from_vec(5, 4, (0..20).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let mut labels = Mat::zeros(5, 3);
        for i in 0..5 {
            labels.set(i, i % 3, 1.0);
        }
        let (p, cache) = net.forward(&x, Mode::Infer, &mut rng).unwrap();
        let dp = cross_entropy_grad(&p, &labels).unwrap();
        let (grads, _) = net.backward(&cache, &dp).unwrap();
        // Closed-form oracle.
        let mut diff = p.clone();
        for i in 0..5 {
            for j in 0..3 {
                diff.set(i, j, (p.get(i, j) - labels.get(i, j)) / 5.0);
            }
        }
        let expect = diff.matmul_tn(&x).unwrap();
        for (a, b) in grads.layers[0].dw.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let _ = cross_entropy(&p, &labels).unwrap();
    }

    #[test]
    fn set_pa_mode_resizes_bn_and_locks_after_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = small_classifier(false, &mut rng);
        assert_eq!(net.layers()[0].bn.as_ref().unwrap().dim(), 5);
        net.set_pa_mode(true).unwrap();
        assert_eq!(net.layers()[0].bn.as_ref().unwrap().dim(), 6);
        net.mark_trained();
        assert!(net.set_pa_mode(false).is_err());
    }

    #[test]
    fn pa_bn_on_constant_batch_emits_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = small_classifier(true, &mut rng);
        for l in &mut net.layers {
            if let Some(bn) = &mut l.bn {
                for b in &mut bn.beta {
                    *b = 0.25;
                }
            }
        }
        let x = Mat::from_vec(3, 6, vec![7.0; 18]).unwrap();
        let (_, cache) = net.forward(&x, Mode::Train, &mut rng).unwrap();
        // First layer BN output is beta everywhere; its dense input equals
        // gamma*0 + beta = 0.25.
        for &v in cache.layers[0].dense_input.data() {
            assert!((v - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_params_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = small_classifier(true, &mut rng);
        let flat = net.flat_params();
        assert_eq!(flat.len(), net.param_len());
        let mut bumped = flat.clone();
        for v in &mut bumped {
            *v += 0.5;
        }
        net.set_flat_params(&bumped).unwrap();
        assert_eq!(net.flat_params(), bumped);
    }
}
