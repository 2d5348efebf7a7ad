//! Activation functions and their exact backward passes.

use serde::{Deserialize, Serialize};

use crate::mat::Mat;

/// Per-layer nonlinearity. `SourceClass` is the discriminator's output head:
/// column 0 is a sigmoid source unit, columns 1..=4 a softmax class head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Softmax,
    SourceClass,
}

pub fn relu_forward(x: &Mat) -> Mat {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn tanh_forward(x: &Mat) -> Mat {
    x.map(f64::tanh)
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max-subtraction so large logits cannot overflow.
pub fn softmax_forward(x: &Mat) -> Mat {
    let mut y = x.clone();
    for i in 0..y.rows() {
        softmax_row(y.row_mut(i));
    }
    y
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

impl Activation {
    /// Forward pass on the affine output `z`.
    pub fn forward(self, z: &Mat) -> Mat {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => relu_forward(z),
            Activation::Tanh => tanh_forward(z),
            Activation::Softmax => softmax_forward(z),
            Activation::SourceClass => {
                let mut y = z.clone();
                for i in 0..y.rows() {
                    let row = y.row_mut(i);
                    row[0] = sigmoid(row[0]);
                    softmax_row(&mut row[1..]);
                }
                y
            }
        }
    }

    /// Backward pass: dL/dz given dL/dy and the forward output `y`.
    pub fn backward(self, y: &Mat, dy: &Mat) -> Mat {
        match self {
            Activation::Identity => dy.clone(),
            Activation::Relu => {
                let mut dz = dy.clone();
                for (g, &out) in dz.data_mut().iter_mut().zip(y.data()) {
                    if out <= 0.0 {
                        *g = 0.0;
                    }
                }
                dz
            }
            Activation::Tanh => {
                let mut dz = dy.clone();
                for (g, &out) in dz.data_mut().iter_mut().zip(y.data()) {
                    *g *= 1.0 - out * out;
                }
                dz
            }
            Activation::Softmax => {
                let mut dz = Mat::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    softmax_backward_row(y.row(i), dy.row(i), dz.row_mut(i));
                }
                dz
            }
            Activation::SourceClass => {
                let mut dz = Mat::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let s = y.get(i, 0);
                    let d = dy.get(i, 0) * s * (1.0 - s);
                    dz.set(i, 0, d);
                    let (yr, dyr) = (y.row(i), dy.row(i));
                    let dzr = dz.row_mut(i);
                    softmax_backward_row(&yr[1..], &dyr[1..], &mut dzr[1..]);
                }
                dz
            }
        }
    }
}

// dz_i = p_i * (dy_i - sum_j dy_j p_j)
fn softmax_backward_row(p: &[f64], dy: &[f64], dz: &mut [f64]) {
    let dot: f64 = p.iter().zip(dy).map(|(&pi, &di)| pi * di).sum();
    for i in 0..p.len() {
        dz[i] = p[i] * (dy[i] - dot);
    }
}
