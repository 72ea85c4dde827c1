//! Quadratic models and minimum-Frobenius-norm interpolation.
//!
//! With `p` samples and `n+2 ≤ p ≤ (n+1)(n+2)/2`, the model Hessian of least
//! Frobenius norm that interpolates the samples is `H = Σ λ_t d_t d_tᵀ`,
//! `d_t = y_t − x`, where `(λ, c, g)` solves the bordered system
//!
//! ```text
//! [ Q   M ] [λ]   [f]
//! [ Mᵀ  0 ] [c] = [0]       Q_ij = ½ (d_iᵀ d_j)²,  M = [1, d_tᵀ]
//!           [g]
//! ```
//!
//! The system is assembled in displacements divided by `s = min(Δ, 1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_to_rows, rows_to_matrix, symmetric_spectral_norm, to_vec, DenseLu, SignedLogDet};
use crate::set::InterpolationSet;

/// Pivot threshold, relative to the largest entry of `F`, below which the
/// system is declared singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// `m(y) = c + gᵀ(y − x) + ½ (y − x)ᵀ H (y − x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    c: f64,
    g: DVector<f64>,
    h: DMatrix<f64>,
    base: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    c: f64,
    g: Vec<f64>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    base: Vec<f64>,
}

impl QuadraticModel {
    /// The Hessian is symmetrized as `(H + Hᵀ)/2`.
    pub fn new(c: f64, g: DVector<f64>, h: DMatrix<f64>, base: DVector<f64>) -> Result<Self> {
        let n = base.len();
        if g.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.len() });
        }
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: h.nrows().max(h.ncols()) });
        }
        let mut sym = h;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = v;
                sym[(j, i)] = v;
            }
        }
        Ok(QuadraticModel { c, g, h: sym, base })
    }

    pub fn linear(c: f64, g: DVector<f64>, base: DVector<f64>) -> Result<Self> {
        let n = base.len();
        Self::new(c, g, DMatrix::zeros(n, n), base)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        let d = y - &self.base;
        self.c + self.g.dot(&d) + 0.5 * d.dot(&(&self.h * &d))
    }

    /// Value at `x + s`.
    pub fn eval_step(&self, s: &DVector<f64>) -> f64 {
        self.c + self.g.dot(s) + 0.5 * s.dot(&(&self.h * s))
    }

    pub fn gradient_at(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.g + &self.h * (y - &self.base)
    }

    pub fn hessian_norm(&self) -> f64 {
        symmetric_spectral_norm(&self.h)
    }

    pub fn hessian_frobenius(&self) -> f64 {
        self.h.norm()
    }

    /// `a m1 + b m2`, both expanded about the same base.
    pub fn combine(&self, a: f64, other: &QuadraticModel, b: f64) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::InvalidArgument("models expanded about different base points".into()));
        }
        Self::new(a * self.c + b * other.c, &self.g * a + &other.g * b, &self.h * a + &other.h * b, self.base.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let j = ModelJson { c: self.c, g: to_vec(&self.g), h: matrix_to_rows(&self.h), base: to_vec(&self.base) };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let j: ModelJson = serde_json::from_str(src)?;
        let h = if j.h.is_empty() { DMatrix::zeros(j.base.len(), j.base.len()) } else { rows_to_matrix(&j.h)? };
        Self::new(j.c, DVector::from_vec(j.g), h, DVector::from_vec(j.base))
    }
}

/// Factorized interpolation system for one sample set.
#[derive(Debug, Clone)]
pub struct MfnSystem {
    set: InterpolationSet,
    scale: f64,
    disp: Vec<DVector<f64>>,
    q: DMatrix<f64>,
    m: DMatrix<f64>,
    f: DMatrix<f64>,
    lu: DenseLu,
    /// Column `t` solves `F col = e_t`.
    lagrange: DMatrix<f64>,
}

/// Admissible point counts for a dimension.
pub fn mfn_point_range(n: usize) -> (usize, usize) {
    (n + 2, (n + 1) * (n + 2) / 2)
}

impl MfnSystem {
    pub fn assemble(set: &InterpolationSet) -> Result<Self> {
        let n = set.dim();
        let p = set.len();
        let (lo, hi) = mfn_point_range(n);
        if p < lo || p > hi {
            return Err(Error::InvalidArgument(format!("need {lo} <= p <= {hi} points in dimension {n}, got {p}")));
        }
        let scale = set.scale();
        let disp: Vec<DVector<f64>> = (0..p).map(|t| set.displacement(t) / scale).collect();
        let q = DMatrix::from_fn(p, p, |i, j| 0.5 * disp[i].dot(&disp[j]).powi(2));
        let m = DMatrix::from_fn(p, n + 1, |i, j| if j == 0 { 1.0 } else { disp[i][j - 1] });
        let size = p + n + 1;
        let mut f = DMatrix::zeros(size, size);
        f.view_mut((0, 0), (p, p)).copy_from(&q);
        f.view_mut((0, p), (p, n + 1)).copy_from(&m);
        f.view_mut((p, 0), (n + 1, p)).copy_from(&m.transpose());
        let lu = DenseLu::factor(&f, SINGULAR_PIVOT_TOL)?;
        let mut lagrange = DMatrix::zeros(size, p);
        for t in 0..p {
            let mut e = DVector::zeros(size);
            e[t] = 1.0;
            lagrange.set_column(t, &lu.solve_refined(&f, &e));
        }
        Ok(MfnSystem { set: set.clone().without_values(), scale, disp, q, m, f, lu, lagrange })
    }

    pub fn set(&self) -> &InterpolationSet {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `Q` in scaled coordinates.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `M` in scaled coordinates.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `F` in scaled coordinates.
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// Determinant of the scaled `F`.
    pub fn determinant(&self) -> SignedLogDet {
        self.lu.determinant()
    }

    pub fn min_pivot_ratio(&self) -> f64 {
        self.lu.min_pivot_ratio()
    }

    /// Columns `F⁻¹ e_t`, `t = 1..p`.
    pub fn lagrange_solutions(&self) -> &DMatrix<f64> {
        &self.lagrange
    }

    fn scaled(&self, y: &DVector<f64>) -> DVector<f64> {
        (y - self.set.base()) / self.scale
    }

    /// `φ(y) = [{½ (dᵀ d_s)²}_s; 1; d]` with `d` the scaled displacement of `y`.
    pub fn phi(&self, y: &DVector<f64>) -> DVector<f64> {
        let d = self.scaled(y);
        let p = self.len();
        let n = self.dim();
        DVector::from_fn(p + n + 1, |i, _| {
            if i < p {
                0.5 * d.dot(&self.disp[i]).powi(2)
            } else if i == p {
                1.0
            } else {
                d[i - p - 1]
            }
        })
    }

    fn check_y(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        Ok(())
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.len() {
            return Err(Error::InvalidArgument(format!("index {t} out of range for {} points", self.len())));
        }
        Ok(())
    }

    /// Solve `F [λ; c; g] = [values; 0]` and map back to original coordinates.
    pub fn fit(&self, values: &[f64]) -> Result<QuadraticModel> {
        let p = self.len();
        let n = self.dim();
        if values.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: values.len() });
        }
        let mut rhs = DVector::zeros(p + n + 1);
        rhs.rows_mut(0, p).copy_from_slice(values);
        let sol = self.lu.solve_refined(&self.f, &rhs);
        Ok(self.model_from_solution(&sol))
    }

    fn model_from_solution(&self, sol: &DVector<f64>) -> QuadraticModel {
        let p = self.len();
        let n = self.dim();
        let s = self.scale;
        let mut h = DMatrix::zeros(n, n);
        for t in 0..p {
            h.ger(sol[t], &self.disp[t], &self.disp[t], 1.0);
        }
        h /= s * s;
        let g = sol.rows(p + 1, n).into_owned() / s;
        QuadraticModel::new(sol[p], g, h, self.set.base().clone()).expect("dimensions agree by construction")
    }

    /// All Lagrange values `ℓ_1(y)..ℓ_p(y)`, the first `p` entries of
    /// `F⁻¹ φ(y)`. Solving directly keeps the identities `Mᵀℓ(y) = [1; d]`
    /// at residual level even when `F` is poorly conditioned.
    pub fn lagrange_values(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_y(y)?;
        let z = self.lu.solve_refined(&self.f, &self.phi(y));
        Ok(z.rows(0, self.len()).into_owned())
    }

    /// `ℓ_t(y) = e_tᵀ F⁻¹ φ(y)`.
    pub fn lagrange_value(&self, t: usize, y: &DVector<f64>) -> Result<f64> {
        self.check_t(t)?;
        self.check_y(y)?;
        Ok(self.lagrange.column(t).dot(&self.phi(y)))
    }

    /// `ℓ_t` as a quadratic in original coordinates.
    pub fn lagrange_polynomial(&self, t: usize) -> Result<QuadraticModel> {
        self.check_t(t)?;
        Ok(self.model_from_solution(&self.lagrange.column(t).into_owned()))
    }

    /// Ratio `det F̃ / det F` when `y_t` is replaced by `y`, evaluated as
    /// `ℓ_t(y)² + α_t β_t`.
    ///
    /// This is algebraically equal to [`MfnSystem::swap_ratio_direct`] but
    /// avoids its cancellation when `β_t` is near zero, as it is exactly
    /// for full quadratic interpolation.
    pub fn swap_ratio(&self, t: usize, y: &DVector<f64>) -> Result<f64> {
        let (ell, alpha, beta) = self.swap_ratio_lagrange_form(t, y)?;
        Ok(ell * ell + alpha * beta)
    }

    /// The same ratio from the symmetric row/column update formula
    /// `(e_tᵀA⁻¹ṽ)² + (e_tᵀA⁻¹e_t) ṽᵀ(e_t − A⁻¹ṽ)`, where `ṽ` is `φ(y)` with
    /// entry `t` replaced by `½‖d‖⁴`.
    pub fn swap_ratio_direct(&self, t: usize, y: &DVector<f64>) -> Result<f64> {
        self.check_t(t)?;
        self.check_y(y)?;
        let phi = self.phi(y);
        let d = self.scaled(y);
        let mut v = phi;
        v[t] = 0.5 * d.norm_squared().powi(2);
        let a_inv_v = self.lu.solve_refined(&self.f, &v);
        let col_t = self.lagrange.column(t);
        let tau1 = col_t.dot(&v);
        let alpha = col_t[t];
        let mut e_minus = -a_inv_v;
        e_minus[t] += 1.0;
        Ok(tau1 * tau1 + alpha * v.dot(&e_minus))
    }

    /// `(ℓ_t(y), α_t, β_t)` with `α_t = e_tᵀF⁻¹e_t` and
    /// `β_t = ½‖d‖⁴ − φ(y)ᵀF⁻¹φ(y)`.
    pub fn swap_ratio_lagrange_form(&self, t: usize, y: &DVector<f64>) -> Result<(f64, f64, f64)> {
        self.check_t(t)?;
        self.check_y(y)?;
        let phi = self.phi(y);
        let w = self.lu.solve_refined(&self.f, &phi);
        let ell = w[t];
        let alpha = self.lagrange[(t, t)];
        let d = self.scaled(y);
        let beta = 0.5 * d.norm_squared().powi(2) - phi.dot(&w);
        Ok((ell, alpha, beta))
    }

    /// Predicted determinant of the scaled system after replacing `y_t` by `y`.
    pub fn det_after_point_swap(&self, t: usize, y: &DVector<f64>) -> Result<SignedLogDet> {
        Ok(self.determinant().scaled(self.swap_ratio(t, y)?))
    }
}
