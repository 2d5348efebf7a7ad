//! Inverted dropout: surviving entries are scaled by 1/keep_prob at train
//! time so inference is an exact identity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::batchnorm::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub keep_prob: f64,
}

impl DropoutSpec {
    pub fn new(keep_prob: f64) -> Result<Self> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::Config(format!(
                "dropout keep_prob must be in (0, 1], got {keep_prob}"
            )));
        }
        Ok(DropoutSpec { keep_prob })
    }
}

/// Returns (y, mask). The mask holds the scale applied per entry
/// (0 or 1/keep_prob); backward multiplies by it.
pub fn dropout_forward(
    x: &Mat,
    s: DropoutSpec,
    mode: Mode,
    rng: &mut impl Rng,
) -> (Mat, Option<Mat>) {
    if mode == Mode::Infer || s.keep_prob == 1.0 {
        return (x.clone(), None);
    }
    let scale = 1.0 / s.keep_prob;
    let mut mask = Mat::zeros(x.rows(), x.cols());
    for v in mask.data_mut() {
        if rng.gen::<f64>() < s.keep_prob {
            *v = scale;
        }
    }
    let mut y = x.clone();
    for (v, &m) in y.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
    (y, Some(mask))
}

pub fn dropout_backward(dy: &Mat, mask: &Mat) -> Mat {
    let mut dx = dy.clone();
    for (g, &m) in dx.data_mut().iter_mut().zip(mask.data()) {
        *g *= m;
    }
    dx
}
