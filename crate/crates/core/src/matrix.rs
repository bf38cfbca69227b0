//! Dense row-major f64 matrices.
//!
//! This is the storage type for parameters, activations and covariances. The
//! multiply kernel is the classic i-k-j "axpy" ordering: the inner loop walks
//! two contiguous rows, which LLVM vectorises to FMA on the host target. That
//! is enough to keep a one-layer transformer training run CPU-bound rather
//! than allocator- or cache-bound at these sizes (d ≤ 512).

use crate::math;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixError {
    /// Inner dimensions disagree; carries both shapes and the operation name.
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    BadLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::ShapeMismatch { op, left, right } => write!(
                f,
                "{op}: shape mismatch {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            MatrixError::BadLength { rows, cols, len } => {
                write!(f, "data length {len} != {rows}x{cols}")
            }
        }
    }
}

impl core::error::Error for MatrixError {}

/// Dense row-major matrix of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        matmul_into(&mut out, self, other, false);
        Ok(out)
    }

    /// `self + other`, same shape.
    pub fn add(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.shape() != other.shape() {
            return Err(MatrixError::ShapeMismatch {
                op: "add",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = self.clone();
        for (o, x) in out.data.iter_mut().zip(&other.data) {
            *o += x;
        }
        Ok(out)
    }

    /// `self - other`, same shape.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.shape() != other.shape() {
            return Err(MatrixError::ShapeMismatch {
                op: "sub",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = self.clone();
        for (o, x) in out.data.iter_mut().zip(&other.data) {
            *o -= x;
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= c;
        }
        out
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for o in self.data.iter_mut() {
            *o *= c;
        }
    }

    /// `self += c * other` (shapes must match).
    pub fn axpy(&mut self, c: f64, other: &Matrix) -> Result<(), MatrixError> {
        if self.shape() != other.shape() {
            return Err(MatrixError::ShapeMismatch {
                op: "axpy",
                left: self.shape(),
                right: other.shape(),
            });
        }
        for (o, x) in self.data.iter_mut().zip(&other.data) {
            *o += c * x;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn trace(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Max |a_ij - a_ji|, a cheap symmetry measure.
    pub fn asymmetry(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self.get(i, j) - self.get(j, i)).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetrized(&self) -> Matrix {
        debug_assert_eq!(self.rows, self.cols);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                s.set(i, j, v);
            }
        }
        s
    }

    pub fn to_compact_string(&self) -> String {
        let mut s = format!("{}x{} [", self.rows, self.cols);
        for (k, v) in self.data.iter().enumerate() {
            if k > 0 {
                s.push_str(", ");
            }
            s.push_str(&format!("{v}"));
        }
        s.push(']');
        s
    }
}

/// `out (+)= a · b`; accumulates when `accumulate` is set, overwrites otherwise.
///
/// i-k-j ordering with 4-row blocking: each streamed row of `b` is reused
/// across four accumulator rows, which roughly doubles throughput over the
/// plain axpy loop on this workload.
pub fn matmul_into(out: &mut Matrix, a: &Matrix, b: &Matrix, accumulate: bool) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!(out.rows, a.rows);
    debug_assert_eq!(out.cols, b.cols);
    if !accumulate {
        out.data.iter_mut().for_each(|x| *x = 0.0);
    }
    let (m, kk) = (a.rows, a.cols);
    let n = b.cols;
    let ad = &a.data;
    let bd = &b.data;
    let od = &mut out.data;

    let mut i = 0;
    while i + 4 <= m {
        for k in 0..kk {
            let b_row = &bd[k * n..(k + 1) * n];
            let a0 = ad[i * kk + k];
            let a1 = ad[(i + 1) * kk + k];
            let a2 = ad[(i + 2) * kk + k];
            let a3 = ad[(i + 3) * kk + k];
            let (o01, o23) = od[i * n..(i + 4) * n].split_at_mut(2 * n);
            let (o0, o1) = o01.split_at_mut(n);
            let (o2, o3) = o23.split_at_mut(n);
            for j in 0..n {
                let bv = b_row[j];
                o0[j] += a0 * bv;
                o1[j] += a1 * bv;
                o2[j] += a2 * bv;
                o3[j] += a3 * bv;
            }
        }
        i += 4;
    }
    while i < m {
        let a_row = &ad[i * kk..(i + 1) * kk];
        let out_row = &mut od[i * n..(i + 1) * n];
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = &bd[k * n..(k + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
        i += 1;
    }
}

/// `out (+)= aᵀ · b` without materialising `aᵀ`.
///
/// This is the gradient-of-weights pattern `dW = xᵀ · dy`; blocking over four
/// samples keeps four contiguous `b` rows live per written `out` row.
pub fn matmul_at_b_into(out: &mut Matrix, a: &Matrix, b: &Matrix, accumulate: bool) {
    debug_assert_eq!(a.rows, b.rows);
    debug_assert_eq!(out.rows, a.cols);
    debug_assert_eq!(out.cols, b.cols);
    if !accumulate {
        out.data.iter_mut().for_each(|x| *x = 0.0);
    }
    let (m, kk) = (a.rows, a.cols);
    let n = b.cols;
    let ad = &a.data;
    let bd = &b.data;
    let od = &mut out.data;

    let mut i = 0;
    while i + 4 <= m {
        let b0 = &bd[i * n..(i + 1) * n];
        let b1 = &bd[(i + 1) * n..(i + 2) * n];
        let b2 = &bd[(i + 2) * n..(i + 3) * n];
        let b3 = &bd[(i + 3) * n..(i + 4) * n];
        for k in 0..kk {
            let a0 = ad[i * kk + k];
            let a1 = ad[(i + 1) * kk + k];
            let a2 = ad[(i + 2) * kk + k];
            let a3 = ad[(i + 3) * kk + k];
            let out_row = &mut od[k * n..(k + 1) * n];
            for j in 0..n {
                out_row[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
        }
        i += 4;
    }
    while i < m {
        let a_row = &ad[i * kk..(i + 1) * kk];
        let b_row = &bd[i * n..(i + 1) * n];
        for (k, &aik) in a_row.iter().enumerate() {
            let out_row = &mut od[k * n..(k + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
        i += 1;
    }
}

/// `out (+)= a · bᵀ`; `bᵀ` is materialised once (b is small in our uses).
pub fn matmul_a_bt_into(out: &mut Matrix, a: &Matrix, b: &Matrix, accumulate: bool) {
    debug_assert_eq!(a.cols, b.cols);
    debug_assert_eq!(out.rows, a.rows);
    debug_assert_eq!(out.cols, b.rows);
    let bt = b.transpose();
    matmul_into(out, a, &bt, accumulate);
}
