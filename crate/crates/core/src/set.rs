//! Sample sets shared by all model builders.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConvexRegion;
use crate::linalg::to_vec;

/// Base point `x`, radius `Δ`, sample points `y_1..y_p` and, optionally,
/// the objective values at those points.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSet {
    base: DVector<f64>,
    radius: f64,
    points: Vec<DVector<f64>>,
    values: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SetJson {
    base: Vec<f64>,
    radius: f64,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

impl InterpolationSet {
    pub fn new(base: DVector<f64>, radius: f64, points: Vec<DVector<f64>>) -> Result<Self> {
        let n = base.len();
        if n == 0 {
            return Err(Error::InvalidArgument("base point must have positive dimension".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("set needs at least one point".into()));
        }
        if let Some(y) = points.iter().find(|y| y.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if base.iter().chain(points.iter().flat_map(|y| y.iter())).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(InterpolationSet { base, radius, points, values: None })
    }

    pub fn with_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.points.len() {
            return Err(Error::DimensionMismatch { expected: self.points.len(), got: values.len() });
        }
        self.values = Some(values);
        Ok(self)
    }

    pub fn without_values(mut self) -> Self {
        self.values = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `min(Δ, 1)`, the radius of the ball the geometry conditions live on.
    pub fn scale(&self) -> f64 {
        self.radius.min(1.0)
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn point(&self, t: usize) -> &DVector<f64> {
        &self.points[t]
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn displacement(&self, t: usize) -> DVector<f64> {
        &self.points[t] - &self.base
    }

    /// `max_t ‖y_t − x‖ / min(Δ, 1)`.
    pub fn beta(&self) -> f64 {
        let s = self.scale();
        self.points.iter().map(|y| (y - &self.base).norm() / s).fold(0.0, f64::max)
    }

    /// Replace point `t`; the stored value for it is dropped unless given.
    pub fn replace(&mut self, t: usize, y: DVector<f64>, value: Option<f64>) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        if t >= self.len() {
            return Err(Error::InvalidArgument(format!("index {t} out of range for {} points", self.len())));
        }
        self.points[t] = y;
        match (&mut self.values, value) {
            (Some(vals), Some(v)) => vals[t] = v,
            (Some(_), None) => self.values = None,
            (None, _) => {}
        }
        Ok(())
    }

    /// Same points with a new base and radius. Values are kept.
    pub fn recentered(&self, base: DVector<f64>, radius: f64) -> Result<Self> {
        let mut s = InterpolationSet::new(base, radius, self.points.clone())?;
        s.values = self.values.clone();
        Ok(s)
    }

    /// True when every point lies in `region` within `tol`.
    pub fn all_feasible(&self, region: &ConvexRegion, tol: f64) -> bool {
        self.points.iter().all(|y| region.contains(y, tol))
    }

    pub fn to_json(&self) -> Result<String> {
        let j = SetJson {
            base: to_vec(&self.base),
            radius: self.radius,
            points: self.points.iter().map(to_vec).collect(),
            values: self.values.clone(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let j: SetJson = serde_json::from_str(src)?;
        let set = InterpolationSet::new(
            DVector::from_vec(j.base),
            j.radius,
            j.points.into_iter().map(DVector::from_vec).collect(),
        )?;
        match j.values {
            Some(v) => set.with_values(v),
            None => Ok(set),
        }
    }
}
