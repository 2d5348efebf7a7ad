//! Central finite-difference verification of analytic gradients.
//!
//! The check only uses the forward pass and a scalar loss closure, so it is
//! independent of the backward implementation it verifies. Coordinates are
//! subsampled per parameter tensor; the networks are small enough that this
//! gives dense coverage across seeds.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::nn::network::Network;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct TensorError {
    pub layer: usize,
    pub tensor: &'static str,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub per_tensor: Vec<TensorError>,
}

impl GradCheckReport {
    pub fn worst_tensor(&self) -> Option<&TensorError> {
        self.per_tensor
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

struct TensorSpan {
    layer: usize,
    tensor: &'static str,
    start: usize,
    len: usize,
}

fn tensor_spans(net: &Network) -> Vec<TensorSpan> {
    let mut spans = Vec::new();
    let mut pos = 0;
    for (i, l) in net.layers().iter().enumerate() {
        let wlen = l.dense.w.data().len();
        spans.push(TensorSpan { layer: i, tensor: "W", start: pos, len: wlen });
        pos += wlen;
        let blen = l.dense.b.len();
        spans.push(TensorSpan { layer: i, tensor: "b", start: pos, len: blen });
        pos += blen;
        if let Some(bn) = &l.bn {
            let d = bn.dim();
            spans.push(TensorSpan { layer: i, tensor: "gamma", start: pos, len: d });
            pos += d;
            spans.push(TensorSpan { layer: i, tensor: "beta", start: pos, len: d });
            pos += d;
        }
    }
    spans
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// Compare `analytic` (flat, in [`Network::flat_params`] order) against
/// central finite differences of `loss_fn`, sampling up to
/// `samples_per_tensor` coordinates from each parameter tensor.
///
/// A coordinate that fails at step `h` is re-checked at h/10 and 10h and the
/// best agreement is kept; this filters spurious kink crossings of ReLU
/// without masking genuinely wrong gradients, which fail at every step size.
pub fn check_gradients(
    net: &Network,
    analytic: &[f64],
    loss_fn: &dyn Fn(&Network) -> Result<f64>,
    samples_per_tensor: usize,
    h: f64,
    rng: &mut impl Rng,
) -> Result<GradCheckReport> {
    let base = net.flat_params();
    assert_eq!(analytic.len(), base.len(), "analytic gradient length");
    let mut work = net.clone();
    let mut params = base.clone();

    let fd_at = |idx: usize, step: f64, work: &mut Network, params: &mut Vec<f64>| -> Result<f64> {
        let orig = params[idx];
        params[idx] = orig + step;
        work.set_flat_params(params)?;
        let plus = loss_fn(work)?;
        params[idx] = orig - step;
        work.set_flat_params(params)?;
        let minus = loss_fn(work)?;
        params[idx] = orig;
        Ok((plus - minus) / (2.0 * step))
    };

    let mut per_tensor = Vec::new();
    let mut max_rel = 0.0f64;
    let mut checked = 0;
    for span in tensor_spans(net) {
        let k = samples_per_tensor.min(span.len);
        let picks = sample(rng, span.len, k);
        let mut tensor_max = 0.0f64;
        for off in picks {
            let idx = span.start + off;
            let g = analytic[idx];
            let fd = fd_at(idx, h, &mut work, &mut params)?;
            let mut err = rel_err(g, fd);
            if err > DEFAULT_TOLERANCE {
                for alt in [h / 10.0, h * 10.0] {
                    let fd2 = fd_at(idx, alt, &mut work, &mut params)?;
                    err = err.min(rel_err(g, fd2));
                }
            }
            tensor_max = tensor_max.max(err);
            checked += 1;
        }
        max_rel = max_rel.max(tensor_max);
        per_tensor.push(TensorError {
            layer: span.layer,
            tensor: span.tensor,
            max_rel_err: tensor_max,
        });
    }
    // Restore, in case the caller reuses `work`'s source.
    work.set_flat_params(&base)?;
    Ok(GradCheckReport {
        max_rel_err: max_rel,
        checked,
        per_tensor,
    })
}
