//! Cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Plane rotations annihilate one off-diagonal element at a time, sweeping the
//! whole upper triangle per pass. Robust and plenty fast for d ≤ 512, which is
//! the covariance regime monitored here. Input is symmetrised as `(M + Mᵀ)/2`
//! before iterating; convergence is declared when the off-diagonal Frobenius
//! norm drops below `1e-12 · ‖M‖_F`, with a hard cap of 100 sweeps.

use crate::math;
use crate::matrix::Matrix;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

const REL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
/// Inputs may deviate from exact symmetry by at most this much (absolute,
/// relative to the largest entry).
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum EigenError {
    NotSquare { rows: usize, cols: usize },
    NonFinite,
    NotSymmetric { max_asymmetry: f64 },
}

impl fmt::Display for EigenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EigenError::NotSquare { rows, cols } => {
                write!(f, "eigensolver needs a square matrix, got {rows}x{cols}")
            }
            EigenError::NonFinite => write!(f, "eigensolver input contains non-finite entries"),
            EigenError::NotSymmetric { max_asymmetry } => {
                write!(f, "matrix asymmetry {max_asymmetry:e} exceeds tolerance")
            }
        }
    }
}

impl core::error::Error for EigenError {}

/// Eigenvalues (descending) and the matching eigenvectors as columns.
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

fn validate(m: &Matrix) -> Result<(), EigenError> {
    if m.rows() != m.cols() {
        return Err(EigenError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(EigenError::NonFinite);
    }
    let scale = m
        .data()
        .iter()
        .fold(0.0f64, |acc, x| if x.abs() > acc { x.abs() } else { acc });
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * scale.max(1.0) {
        return Err(EigenError::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// Cyclic sweeps on the flat upper triangle of `a` (row-major, n×n).
/// `v` accumulates rotations when eigenvectors are wanted.
fn jacobi_flat(a: &mut [f64], n: usize, mut v: Option<&mut [f64]>) {
    if n <= 1 {
        return;
    }
    let total_sq: f64 = {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = a[i * n + j];
                s += x * x;
            }
        }
        s
    };
    let threshold_sq = (REL_TOL * REL_TOL) * total_sq;

    for _ in 0..MAX_SWEEPS {
        let mut off_sq = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let x = a[i * n + j];
                off_sq += 2.0 * x * x;
            }
        }
        if off_sq <= threshold_sq {
            break;
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Stable rotation: t = sign(θ)/(|θ| + sqrt(θ²+1)).
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;

                a[p * n + p] = app - h;
                a[q * n + q] = aqq + h;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                // rotate the remaining (j,p)/(j,q) pairs, upper triangle only
                for j in 0..p {
                    let g = a[j * n + p];
                    let w = a[j * n + q];
                    a[j * n + p] = g - s * (w + g * tau);
                    a[j * n + q] = w + s * (g - w * tau);
                }
                for j in p + 1..q {
                    let g = a[p * n + j];
                    let w = a[j * n + q];
                    a[p * n + j] = g - s * (w + g * tau);
                    a[j * n + q] = w + s * (g - w * tau);
                }
                for j in q + 1..n {
                    let g = a[p * n + j];
                    let w = a[q * n + j];
                    a[p * n + j] = g - s * (w + g * tau);
                    a[q * n + j] = w + s * (g - w * tau);
                }
                if let Some(vm) = v.as_deref_mut() {
                    for j in 0..n {
                        let g = vm[j * n + p];
                        let w = vm[j * n + q];
                        vm[j * n + p] = g - s * (w + g * tau);
                        vm[j * n + q] = w + s * (g - w * tau);
                    }
                }
            }
        }
    }
    // mirror the triangle back so callers can read either half
    for i in 0..n {
        for j in (i + 1)..n {
            a[j * n + i] = a[i * n + j];
        }
    }
}

/// Full symmetric eigendecomposition, eigenvalues descending (unclamped).
pub fn sym_eigen(m: &Matrix) -> Result<EigenDecomposition, EigenError> {
    validate(m)?;
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    jacobi_flat(a.data_mut(), n, Some(v.data_mut()));

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues of the symmetrised matrix, descending and clamped to `[0, ∞)`.
///
/// The clamp removes the tiny negative residue PSD covariances pick up in
/// finite precision; genuinely indefinite inputs should use [`sym_eigen`].
pub fn sym_eigvals(m: &Matrix) -> Result<Vec<f64>, EigenError> {
    validate(m)?;
    let n = m.rows();
    let mut a = m.symmetrized();
    jacobi_flat(a.data_mut(), n, None);
    let mut vals: Vec<f64> = (0..n).map(|i| a.get(i, i).max(0.0)).collect();
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(vals)
}

/// Raw (unclamped) eigenvalues, descending, without accumulating vectors.
pub fn sym_eigvals_raw(m: &Matrix) -> Result<Vec<f64>, EigenError> {
    validate(m)?;
    let n = m.rows();
    let mut a = m.symmetrized();
    jacobi_flat(a.data_mut(), n, None);
    let mut vals: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(vals)
}
