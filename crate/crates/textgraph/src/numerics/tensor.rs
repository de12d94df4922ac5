//! Row-major dense `f64` matrices.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A dense row-major matrix. Vectors are represented as `n x 1` or `1 x n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "tensor data length {} does not match shape {}x{}",
            data.len(),
            rows,
            cols
        );
        Tensor { rows, cols, data }
    }

    /// Builds a tensor row by row from a generator function.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Matrix product, parallel over output rows when the `parallel`
    /// feature is enabled. Either way each output row is accumulated
    /// sequentially, so results are bitwise identical across both paths.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        #[cfg(feature = "parallel")]
        {
            self.matmul_par(other)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.matmul_seq(other)
        }
    }

    /// Sequential reference matmul. Used when the `parallel` feature is
    /// off and by the benchmark suite for comparison.
    pub fn matmul_seq(&self, other: &Tensor) -> Tensor {
        self.check_matmul(other);
        let mut out = Tensor::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            matmul_row(self.row(i), other, out.row_mut(i));
        }
        out
    }

    #[cfg(feature = "parallel")]
    fn matmul_par(&self, other: &Tensor) -> Tensor {
        self.check_matmul(other);
        let mut out = Tensor::zeros(self.rows, other.cols);
        let cols = other.cols;
        out.data
            .par_chunks_mut(cols.max(1))
            .enumerate()
            .for_each(|(i, out_row)| {
                matmul_row(self.row(i), other, out_row);
            });
        out
    }

    fn check_matmul(&self, other: &Tensor) {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} . {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
    }
}

fn matmul_row(a_row: &[f64], b: &Tensor, out_row: &mut [f64]) {
    for (l, &a_il) in a_row.iter().enumerate() {
        if a_il == 0.0 {
            continue;
        }
        let b_row = b.row(l);
        for (o, &b_lj) in out_row.iter_mut().zip(b_row) {
            *o += a_il * b_lj;
        }
    }
}

/// Panics in debug builds if the tensor contains NaN or infinity.
pub(crate) fn debug_assert_finite(t: &Tensor, ctx: &str) {
    debug_assert!(t.all_finite(), "non-finite values after {ctx}");
    let _ = (t, ctx);
}
