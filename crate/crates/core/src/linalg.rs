//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A determinant stored as sign and log-magnitude so products of many
/// swap ratios neither overflow nor underflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLogDet {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLogDet {
    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            SignedLogDet { sign: 0.0, log_abs: f64::NEG_INFINITY }
        } else {
            SignedLogDet { sign: v.signum(), log_abs: v.abs().ln() }
        }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }

    /// Multiply by a real ratio.
    pub fn scaled(&self, ratio: f64) -> Self {
        let r = SignedLogDet::from_value(ratio);
        SignedLogDet { sign: self.sign * r.sign, log_abs: self.log_abs + r.log_abs }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0.0 || !self.log_abs.is_finite()
    }
}

/// LU factorization with partial pivoting that refuses to factor
/// numerically singular matrices.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: LU<f64, Dyn, Dyn>,
    det: SignedLogDet,
    min_pivot_ratio: f64,
}

impl DenseLu {
    /// Factor `a`. The matrix is rejected when some pivot magnitude falls
    /// below `rel_tol` times the largest entry of `a`.
    pub fn factor(a: &DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let scale = a.amax();
        if !(scale.is_finite()) || scale == 0.0 {
            return Err(Error::SingularGeometry("zero or non-finite matrix".into()));
        }
        let lu = LU::new(a.clone());
        let u = lu.u();
        let mut log_abs = 0.0;
        let mut sign: f64 = lu.p().determinant();
        let mut min_pivot = f64::INFINITY;
        for i in 0..u.nrows() {
            let d = u[(i, i)];
            min_pivot = min_pivot.min(d.abs());
            if d == 0.0 || !d.is_finite() {
                return Err(Error::SingularGeometry(format!("zero pivot at position {i}")));
            }
            sign *= d.signum();
            log_abs += d.abs().ln();
        }
        let min_pivot_ratio = min_pivot / scale;
        if min_pivot_ratio < rel_tol {
            return Err(Error::SingularGeometry(format!(
                "pivot ratio {min_pivot_ratio:e} below threshold {rel_tol:e}"
            )));
        }
        if !log_abs.is_finite() {
            return Err(Error::SingularGeometry("log-determinant underflow".into()));
        }
        Ok(DenseLu { lu, det: SignedLogDet { sign, log_abs }, min_pivot_ratio })
    }

    pub fn determinant(&self) -> SignedLogDet {
        self.det
    }

    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("factorization was checked for singularity")
    }

    /// Solve with one step of iterative refinement against the original matrix.
    pub fn solve_refined(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve(b);
        let r = b - a * &x;
        x += self.solve(&r);
        x
    }
}

/// Thin SVD `a = u diag(s) v_t` by one-sided Jacobi rotations, singular
/// values in decreasing order.
///
/// Used instead of `nalgebra::SVD`, which returns factorizations that are
/// off by far more than rounding on a small fraction of well-conditioned
/// design matrices (about 7 in 10⁴ random 2x2 to 11x6 cases).
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if a.nrows() < a.ncols() {
        let (u, s, v_t) = jacobi_svd(&a.transpose());
        return (v_t.transpose(), s, u.transpose());
    }
    let k = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(k, k);
    for _ in 0..100 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for m in [&mut w, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, i)], m[(r, j)]);
                        m[(r, i)] = c * x - sn * y;
                        m[(r, j)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..k).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s = DVector::from_fn(k, |i, _| norms[order[i]]);
    let u = DMatrix::from_fn(a.nrows(), k, |r, c| if s[c] > 0.0 { w[(r, order[c])] / s[c] } else { 0.0 });
    let v_t = DMatrix::from_fn(k, k, |r, c| v[(c, order[r])]);
    (u, s, v_t)
}

/// Moore-Penrose pseudoinverse through a thin SVD.
#[derive(Debug, Clone)]
pub struct Pseudoinverse {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
    pub rank: usize,
    pub tolerance: f64,
    pub pinv: DMatrix<f64>,
}

impl Pseudoinverse {
    /// Singular values below `max(rows, cols) * eps * sigma_max` are treated as zero.
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let (u, s, v_t) = jacobi_svd(a);
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let tolerance = rows.max(cols) as f64 * f64::EPSILON * smax;
        let mut rank = 0;
        let mut pinv = DMatrix::zeros(cols, rows);
        for k in 0..s.len() {
            if s[k] > tolerance {
                rank += 1;
                let vk = v_t.row(k).transpose();
                let uk = u.column(k);
                pinv += (vk * uk.transpose()) / s[k];
            }
        }
        Pseudoinverse { u, singular_values: s, v_t, rank, tolerance, pinv }
    }
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(h: &DMatrix<f64>) -> f64 {
    if h.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(h.clone()).eigenvalues.amax()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn symmetric_min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.min()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}
