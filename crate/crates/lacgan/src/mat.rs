//! Dense row-major f64 matrix. All network quantities (x_raw, x_real,
//! x_fake, z, batches of probabilities) live in this type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Mat::from_vec",
                format!("{rows}x{cols}"),
                data.len(),
            ));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dim("Mat::from_rows", c, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-wise map into a new matrix.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self * other^T`, i.e. (r x k) * (c x k)^T -> (r x c).
    /// This is the layout dense layers use: x (batch x in) times W (out x in).
    pub fn matmul_nt(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return Err(Error::dim(
                "matmul_nt inner dimension",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let xi = self.row(i);
            for j in 0..other.rows {
                let wj = other.row(j);
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += xi[k] * wj[k];
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        Ok(out)
    }

    /// `self * other`, (r x k) * (k x c) -> (r x c). i-k-j loop order.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul inner dimension",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let oi = i * other.cols;
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let bk = k * other.cols;
                for j in 0..other.cols {
                    out.data[oi + j] += a * other.data[bk + j];
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other`, (k x r)^T * (k x c) -> (r x c).
    pub fn matmul_tn(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows {
            return Err(Error::dim(
                "matmul_tn inner dimension",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i];
                if a == 0.0 {
                    continue;
                }
                let bk = k * other.cols;
                let oi = i * other.cols;
                for j in 0..other.cols {
                    out.data[oi + j] += a * other.data[bk + j];
                }
            }
        }
        Ok(out)
    }

    /// Horizontal concatenation: (r x a) ++ (r x b) -> (r x (a+b)).
    pub fn hconcat(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows {
            return Err(Error::dim("hconcat rows", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Mat {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// New matrix with the given rows of `self`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Mat {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Mat::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn matmul_nt_matches_naive_triple_loop() {
        // Independent oracle: naive (i, j, k) triple loop over explicit indices.
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        let x = Mat::from_vec(4, 3, (0..12).map(|_| next()).collect()).unwrap();
        let w = Mat::from_vec(5, 3, (0..15).map(|_| next()).collect()).unwrap();
        let y = x.matmul_nt(&w).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let mut expect = 0.0;
                for k in 0..3 {
                    expect += x.get(i, k) * w.get(j, k);
                }
                assert!((y.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_matmul_is_identity() {
        let i2 = Mat::identity(2);
        let y = i2.matmul(&i2).unwrap();
        assert_eq!(y, Mat::identity(2));
    }

    #[test]
    fn hconcat_widths_add() {
        let a = Mat::zeros(3, 2);
        let b = Mat::zeros(3, 4);
        assert_eq!(a.hconcat(&b).unwrap().cols(), 6);
        assert!(a.hconcat(&Mat::zeros(2, 1)).is_err());
    }
}
