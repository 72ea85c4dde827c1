//! Smooth test objectives with known gradients.
//!
//! Gradients and Lipschitz constants are for validation only; the solver
//! sees nothing but function values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::symmetric_spectral_norm;

pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// A Lipschitz constant of the gradient, valid on the region the
    /// function is registered with.
    fn gradient_lipschitz(&self) -> f64;
}

/// `½ xᵀAx + bᵀx + c` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        if a.nrows() != b.len() || a.ncols() != b.len() {
            return Err(Error::DimensionMismatch { expected: b.len(), got: a.nrows() });
        }
        if (&a - a.transpose()).amax() > 0.0 {
            return Err(Error::InvalidArgument("quadratic term must be symmetric".into()));
        }
        Ok(Quadratic { a, b, c })
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Unconstrained stationary point `−A⁻¹b`, if `A` is invertible.
    pub fn stationary_point(&self) -> Option<DVector<f64>> {
        self.a.clone().lu().solve(&(-&self.b))
    }
}

impl TestFunction for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }

    fn gradient_lipschitz(&self) -> f64 {
        symmetric_spectral_norm(&self.a)
    }
}

/// `gᵀx + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub g: DVector<f64>,
    pub c: f64,
}

impl TestFunction for Affine {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.g.dot(x) + self.c
    }

    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.g.clone()
    }

    fn gradient_lipschitz(&self) -> f64 {
        0.0
    }
}

/// `Σ_i [100 (x_{i+1} − x_i²)² + (1 − x_i)²]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rosenbrock {
    dim: usize,
    lipschitz: f64,
}

impl Rosenbrock {
    /// `lipschitz` must bound the Hessian norm on the intended region.
    pub fn new(dim: usize, lipschitz: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("Rosenbrock needs dimension >= 2".into()));
        }
        Ok(Rosenbrock { dim, lipschitz })
    }

    /// Frobenius bound on the 2-D Hessian over the ball `‖x‖ ≤ r`.
    pub fn lipschitz_on_ball_2d(r: f64) -> f64 {
        let h11 = 2.0 + 400.0 * r + 1200.0 * r * r;
        let h12 = 400.0 * r;
        (h11 * h11 + 2.0 * h12 * h12 + 200.0 * 200.0).sqrt()
    }
}

impl TestFunction for Rosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.dim - 1).map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2)).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for i in 0..self.dim - 1 {
            let r = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * r;
        }
        g
    }

    fn gradient_lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// `Σ_i a_i cos(ω_i x_i)`; its gradient is Lipschitz with constant `max |a_i| ω_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosSum {
    amplitude: DVector<f64>,
    frequency: DVector<f64>,
}

impl CosSum {
    pub fn new(amplitude: DVector<f64>, frequency: DVector<f64>) -> Result<Self> {
        if amplitude.len() != frequency.len() || amplitude.is_empty() {
            return Err(Error::DimensionMismatch { expected: amplitude.len(), got: frequency.len() });
        }
        Ok(CosSum { amplitude, frequency })
    }
}

impl TestFunction for CosSum {
    fn dim(&self) -> usize {
        self.amplitude.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.dim()).map(|i| self.amplitude[i] * (self.frequency[i] * x[i]).cos()).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| -self.amplitude[i] * self.frequency[i] * (self.frequency[i] * x[i]).sin())
    }

    fn gradient_lipschitz(&self) -> f64 {
        (0..self.dim()).map(|i| self.amplitude[i].abs() * self.frequency[i].powi(2)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn fd_check(f: &dyn TestFunction, x: &DVector<f64>) {
        let g = f.gradient(x);
        for i in 0..f.dim() {
            let mut e = DVector::zeros(f.dim());
            e[i] = 1e-6;
            let fd = (f.value(&(x + &e)) - f.value(&(x - &e))) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + g[i].abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = dvector![0.3, -0.7];
        let q = Quadratic::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), dvector![1.0, -1.0], 0.0).unwrap();
        fd_check(&q, &x);
        fd_check(&Rosenbrock::new(2, 1.0).unwrap(), &x);
        fd_check(&CosSum::new(dvector![1.0, 0.5], dvector![2.0, 3.0]).unwrap(), &x);
        fd_check(&Affine { g: dvector![1.0, 2.0], c: 0.5 }, &x);
    }

    #[test]
    fn lipschitz_constants() {
        let c = CosSum::new(dvector![1.0, 0.5], dvector![2.0, 3.0]).unwrap();
        assert_eq!(c.gradient_lipschitz(), 4.5);
        let q = Quadratic::new(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]), dvector![0.0, 0.0], 0.0).unwrap();
        assert!((q.gradient_lipschitz() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock_minimum() {
        let r = Rosenbrock::new(3, 1.0).unwrap();
        assert_eq!(r.value(&dvector![1.0, 1.0, 1.0]), 0.0);
    }
}
