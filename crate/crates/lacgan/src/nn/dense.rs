//! Fully connected layer: forward, backward, and initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Weights are stored out x in so a forward pass is `x * W^T + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl DenseParams {
    /// He-uniform init, for layers followed by ReLU.
    pub fn init_he(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        Self::init_uniform(out_dim, in_dim, bound, rng)
    }

    /// Xavier-uniform init, for layers followed by tanh/softmax/sigmoid.
    pub fn init_xavier(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self::init_uniform(out_dim, in_dim, bound, rng)
    }

    fn init_uniform(out_dim: usize, in_dim: usize, bound: f64, rng: &mut impl Rng) -> Self {
        let data = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        DenseParams {
            w: Mat::from_vec(out_dim, in_dim, data).expect("init shape"),
            b: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }
}

/// y = x * W^T + b, b broadcast over rows.
pub fn dense_forward(x: &Mat, p: &DenseParams) -> Result<Mat> {
    if x.cols() != p.in_dim() {
        return Err(Error::dim(
            "dense_forward input width",
            format!("x {}x{}", x.rows(), x.cols()),
            format!("W {}x{}", p.w.rows(), p.w.cols()),
        ));
    }
    let mut y = x.matmul_nt(&p.w)?;
    for i in 0..y.rows() {
        for (v, b) in y.row_mut(i).iter_mut().zip(&p.b) {
            *v += b;
        }
    }
    Ok(y)
}

/// Gradients of a dense layer given dL/dy and the forward input.
/// Returns (dW, db, dx).
pub fn dense_backward(x: &Mat, p: &DenseParams, dy: &Mat) -> Result<(Mat, Vec<f64>, Mat)> {
    let dw = dy.matmul_tn(x)?; // (out x in)
    let mut db = vec![0.0; p.out_dim()];
    for i in 0..dy.rows() {
        for (acc, &g) in db.iter_mut().zip(dy.row(i)) {
            *acc += g;
        }
    }
    let dx = dy.matmul(&p.w)?; // (batch x in)
    Ok((dw, db, dx))
}
