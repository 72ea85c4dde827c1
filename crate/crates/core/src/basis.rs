//! Common interface over the regression and interpolation model builders.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_models::RegressionBasis;
use crate::quadratic_models::{mfn_point_range, MfnSystem, QuadraticModel};
use crate::set::InterpolationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearRegression,
    MfnQuadratic,
}

impl ModelKind {
    /// Smallest and largest admissible point counts in dimension `n`.
    ///
    /// Regression has no upper limit in principle; the structured initial
    /// set runs out of distinct points at `(n+1)(n+2)/2`.
    pub fn point_range(self, n: usize) -> (usize, usize) {
        match self {
            ModelKind::LinearRegression => (n + 1, (n + 1) * (n + 2) / 2),
            ModelKind::MfnQuadratic => mfn_point_range(n),
        }
    }

    pub fn default_points(self, n: usize) -> usize {
        match self {
            ModelKind::LinearRegression => n + 1,
            ModelKind::MfnQuadratic => 2 * n + 1,
        }
    }

    pub fn check_points(self, n: usize, p: usize) -> Result<()> {
        let (lo, hi) = self.point_range(n);
        if p < lo || p > hi {
            return Err(Error::InvalidArgument(format!("{self} needs {lo} <= p <= {hi} in dimension {n}, got {p}")));
        }
        Ok(())
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LinearRegression => "linreg",
            ModelKind::MfnQuadratic => "mfn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linreg" | "linear" | "linear-regression" => Ok(ModelKind::LinearRegression),
            "mfn" | "quadratic" | "mfn-quadratic" => Ok(ModelKind::MfnQuadratic),
            other => Err(Error::InvalidArgument(format!("unknown model kind '{other}' (expected linreg or mfn)"))),
        }
    }
}

/// A factorized sample set of either kind.
#[derive(Debug, Clone)]
pub enum Basis {
    Regression(RegressionBasis),
    Mfn(MfnSystem),
}

impl Basis {
    pub fn build(kind: ModelKind, set: &InterpolationSet) -> Result<Self> {
        match kind {
            ModelKind::LinearRegression => RegressionBasis::build(set).map(Basis::Regression),
            ModelKind::MfnQuadratic => MfnSystem::assemble(set).map(Basis::Mfn),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Basis::Regression(_) => ModelKind::LinearRegression,
            Basis::Mfn(_) => ModelKind::MfnQuadratic,
        }
    }

    pub fn set(&self) -> &InterpolationSet {
        match self {
            Basis::Regression(b) => b.set(),
            Basis::Mfn(b) => b.set(),
        }
    }

    pub fn len(&self) -> usize {
        self.set().len()
    }

    pub fn is_empty(&self) -> bool {
        self.set().is_empty()
    }

    pub fn dim(&self) -> usize {
        self.set().dim()
    }

    pub fn lagrange_values(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Basis::Regression(b) => b.lagrange_values(y),
            Basis::Mfn(b) => b.lagrange_values(y),
        }
    }

    pub fn lagrange_value(&self, t: usize, y: &DVector<f64>) -> Result<f64> {
        match self {
            Basis::Regression(b) => b.lagrange_value(t, y),
            Basis::Mfn(b) => b.lagrange_value(t, y),
        }
    }

    pub fn lagrange_polynomial(&self, t: usize) -> Result<QuadraticModel> {
        match self {
            Basis::Regression(b) => b.lagrange_polynomial(t),
            Basis::Mfn(b) => b.lagrange_polynomial(t),
        }
    }

    pub fn fit(&self, values: &[f64]) -> Result<QuadraticModel> {
        match self {
            Basis::Regression(b) => Ok(b.fit(values)?.model.to_quadratic()),
            Basis::Mfn(b) => b.fit(values),
        }
    }

    /// Log of a volume measure of the geometry: `log|det F|` for
    /// interpolation, `Σ log σ_i(M)` for regression.
    pub fn log_volume(&self) -> f64 {
        match self {
            Basis::Regression(b) => b.pseudoinverse().singular_values.iter().map(|s| s.ln()).sum(),
            Basis::Mfn(b) => b.determinant().log_abs,
        }
    }

    /// Predicted `log|det F|` after replacing point `t` by `y`; interpolation only.
    pub fn predicted_log_volume(&self, t: usize, y: &DVector<f64>) -> Result<Option<f64>> {
        match self {
            Basis::Regression(_) => Ok(None),
            Basis::Mfn(b) => Ok(Some(b.det_after_point_swap(t, y)?.log_abs)),
        }
    }
}
