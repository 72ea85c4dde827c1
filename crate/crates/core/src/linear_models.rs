//! Linear regression models and their Lagrange polynomials.
//!
//! With `p ≥ n+1` samples, `(c, g)` is the least-squares solution of
//! `M [c; g] = f` for the design matrix `M` with rows `[1, (y_t − x)ᵀ]`.
//! The regression Lagrange polynomial `ℓ_t` has coefficients `M† e_t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Pseudoinverse;
use crate::quadratic_models::QuadraticModel;
use crate::set::InterpolationSet;

/// `m(y) = c + gᵀ(y − x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub c: f64,
    pub g: DVector<f64>,
    pub base: DVector<f64>,
}

impl LinearModel {
    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        self.c + self.g.dot(&(y - &self.base))
    }

    pub fn to_quadratic(&self) -> QuadraticModel {
        QuadraticModel::linear(self.c, self.g.clone(), self.base.clone()).expect("dimensions agree")
    }
}

/// Least-squares fit with its residual norm `‖M [c; g] − f‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub model: LinearModel,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct RegressionBasis {
    set: InterpolationSet,
    m: DMatrix<f64>,
    pinv: Pseudoinverse,
}

impl RegressionBasis {
    /// Build `M` and its pseudoinverse. Fails when `rank M < n + 1`.
    pub fn build(set: &InterpolationSet) -> Result<Self> {
        let n = set.dim();
        let p = set.len();
        if p < n + 1 {
            return Err(Error::InvalidArgument(format!("regression needs p >= {} points, got {p}", n + 1)));
        }
        let m = DMatrix::from_fn(p, n + 1, |t, j| if j == 0 { 1.0 } else { set.point(t)[j - 1] - set.base()[j - 1] });
        let pinv = Pseudoinverse::new(&m);
        if pinv.rank < n + 1 {
            return Err(Error::DegenerateGeometry { rank: pinv.rank, required: n + 1 });
        }
        Ok(RegressionBasis { set: set.clone().without_values(), m, pinv })
    }

    pub fn set(&self) -> &InterpolationSet {
        &self.set
    }

    pub fn design_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn pseudoinverse(&self) -> &Pseudoinverse {
        &self.pinv
    }

    pub fn rank(&self) -> usize {
        self.pinv.rank
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// Coefficients `(c_t, g_t) = M† e_t`.
    pub fn lagrange_coeffs(&self, t: usize) -> Result<(f64, DVector<f64>)> {
        self.check_t(t)?;
        let col = self.pinv.pinv.column(t);
        Ok((col[0], col.rows(1, self.dim()).into_owned()))
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.len() {
            return Err(Error::InvalidArgument(format!("index {t} out of range for {} points", self.len())));
        }
        Ok(())
    }

    fn phi(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        Ok(DVector::from_fn(n + 1, |j, _| if j == 0 { 1.0 } else { y[j - 1] - self.set.base()[j - 1] }))
    }

    /// `ℓ(y) = (M†)ᵀ [1; y − x]`, the minimal-norm solution of `Mᵀ α = [1; y − x]`.
    pub fn lagrange_values(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.pinv.pinv.tr_mul(&self.phi(y)?))
    }

    pub fn lagrange_value(&self, t: usize, y: &DVector<f64>) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.pinv.pinv.column(t).dot(&self.phi(y)?))
    }

    pub fn lagrange_polynomial(&self, t: usize) -> Result<QuadraticModel> {
        let (c, g) = self.lagrange_coeffs(t)?;
        QuadraticModel::linear(c, g, self.set.base().clone())
    }

    /// `(c, g) = M† f`.
    pub fn fit(&self, values: &[f64]) -> Result<RegressionFit> {
        let p = self.len();
        if values.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: values.len() });
        }
        let f = DVector::from_column_slice(values);
        let coef = &self.pinv.pinv * &f;
        let residual = (&self.m * &coef - &f).norm();
        let model = LinearModel { c: coef[0], g: coef.rows(1, self.dim()).into_owned(), base: self.set.base().clone() };
        Ok(RegressionFit { model, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn set1(points: &[f64]) -> InterpolationSet {
        InterpolationSet::new(dvector![0.0], 1.0, points.iter().map(|&v| dvector![v]).collect()).unwrap()
    }

    #[test]
    fn square_design_matrix() {
        let b = RegressionBasis::build(&set1(&[0.0, 1.0])).unwrap();
        assert_eq!(b.design_matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]));
        assert_eq!(b.rank(), 2);
    }

    #[test]
    fn exact_affine_recovery() {
        let b = RegressionBasis::build(&set1(&[0.0, 1.0, 2.0])).unwrap();
        let fit = b.fit(&[0.0, 1.0, 2.0]).unwrap();
        assert!(fit.model.c.abs() < 1e-12);
        assert!((fit.model.g[0] - 1.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let set = InterpolationSet::new(
            dvector![0.0, 0.0],
            1.0,
            vec![dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![2.0, 0.0], dvector![3.0, 0.0]],
        )
        .unwrap();
        assert_eq!(RegressionBasis::build(&set).unwrap_err(), Error::DegenerateGeometry { rank: 2, required: 3 });
    }

    #[test]
    fn constant_fit() {
        let b = RegressionBasis::build(&set1(&[-0.3, 0.1, 0.9, 0.4])).unwrap();
        let fit = b.fit(&[7.0; 4]).unwrap();
        assert!((fit.model.c - 7.0).abs() < 1e-12);
        assert!(fit.model.g[0].abs() < 1e-12);
    }

    #[test]
    fn parabola_least_squares() {
        // Normal equations for rows [1,-1],[1,0],[1,1] and f = (1,0,1):
        // [[3,0],[0,2]] [c,g] = [2,0].
        let b = RegressionBasis::build(&set1(&[-1.0, 0.0, 1.0])).unwrap();
        let fit = b.fit(&[1.0, 0.0, 1.0]).unwrap();
        assert!((fit.model.c - 2.0 / 3.0).abs() < 1e-12);
        assert!(fit.model.g[0].abs() < 1e-12);
    }

    #[test]
    fn square_case_is_interpolation() {
        let set = InterpolationSet::new(
            dvector![0.1, 0.2],
            1.0,
            vec![dvector![0.0, 0.0], dvector![1.0, 0.3], dvector![-0.2, 0.8]],
        )
        .unwrap();
        let b = RegressionBasis::build(&set).unwrap();
        for s in 0..3 {
            let l = b.lagrange_values(set.point(s)).unwrap();
            for t in 0..3 {
                let want = if s == t { 1.0 } else { 0.0 };
                assert!((l[t] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(RegressionBasis::build(&set1(&[0.0])), Err(Error::InvalidArgument(_))));
    }
}
