//! Sampled checks of the fully-linear error bounds.
//!
//! A model is fully linear in `B(x, Δ)` with constants `κ_ef`, `κ_eg` when
//!
//! ```text
//! |f(x+d) − m(x+d)|   ≤ κ_ef Δ²   for x+d ∈ C, ‖d‖ ≤ Δ
//! |(∇f(x) − g)ᵀ d|    ≤ κ_eg Δ    for x+d ∈ C, ‖d‖ ≤ 1
//! ```
//!
//! For a Λ-poised set with `‖y_t − x‖ ≤ β min(Δ,1)` and `∇f` Lipschitz
//! with constant `L`, regression models satisfy this with
//! `κ_ef = pΛLβ² + L/2`, `κ_eg = pΛLβ²`, and minimum-Frobenius-norm models
//! with the constants in [`fully_linear_constants`].

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::ModelKind;
use crate::error::{Error, Result};
use crate::geometry::ConvexRegion;
use crate::problems::TestFunction;
use crate::quadratic_models::QuadraticModel;
use crate::set::InterpolationSet;
use crate::subproblems::criticality_measure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub kappa_ef: f64,
    pub kappa_eg: f64,
    /// Bound on `|d_sᵀ H d_t| / (β² min(Δ,1)²)`; interpolation models only.
    pub kappa_h: Option<f64>,
}

/// `κ_H = L p [8Λβ² + 36Λβ + 58Λ + 6]`.
pub fn hessian_constant(p: usize, lambda: f64, l: f64, beta: f64) -> f64 {
    l * p as f64 * (8.0 * lambda * beta * beta + 36.0 * lambda * beta + 58.0 * lambda + 6.0)
}

pub fn fully_linear_constants(kind: ModelKind, p: usize, lambda: f64, l: f64, beta: f64) -> BoundConstants {
    let pf = p as f64;
    let b2 = beta * beta;
    match kind {
        ModelKind::LinearRegression => BoundConstants {
            kappa_ef: pf * lambda * l * b2 + 0.5 * l,
            kappa_eg: pf * lambda * l * b2,
            kappa_h: None,
        },
        ModelKind::MfnQuadratic => {
            let kh = hessian_constant(p, lambda, l, beta);
            let p32 = pf.powf(1.5);
            BoundConstants {
                kappa_ef: 0.5 * l + 1.5 * p32 * lambda * (l + kh) * b2 + 0.5 * pf * lambda * lambda * kh * b2,
                kappa_eg: p32 * lambda * (l + kh) * b2,
                kappa_h: Some(kh),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constants: BoundConstants,
    pub lipschitz: f64,
    pub lambda: f64,
    pub beta: f64,
    pub delta: f64,
    pub samples: usize,
    pub max_value_error: f64,
    pub max_gradient_error: f64,
    pub max_hessian_term: Option<f64>,
    /// Observed error divided by its bound; 0 when both are 0.
    pub ratio_value: f64,
    pub ratio_gradient: f64,
    pub ratio_hessian: Option<f64>,
}

impl BoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratio_value.max(self.ratio_gradient).max(self.ratio_hessian.unwrap_or(0.0))
    }

    pub fn violated(&self) -> bool {
        self.max_ratio() > 1.0
    }
}

fn ratio(err: f64, bound: f64) -> f64 {
    if err == 0.0 {
        0.0
    } else if bound > 0.0 {
        err / bound
    } else {
        f64::INFINITY
    }
}

/// Settings for [`check_fully_linear_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub kind: ModelKind,
    pub lipschitz: f64,
    pub lambda: f64,
    pub beta: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Compare a model with the true function on sampled feasible points.
///
/// Value errors are sampled on `B(x, Δ) ∩ C`. The gradient term is linear
/// in `d`, so its maximum over `B(x, 1) ∩ C` is computed exactly as the
/// larger of the criticality measures of `±(∇f(x) − g)`; samples are added
/// as a cross-check.
pub fn check_fully_linear_bounds(
    set: &InterpolationSet,
    model: &QuadraticModel,
    f: &dyn TestFunction,
    region: &ConvexRegion,
    opts: &BoundCheck,
) -> Result<BoundReport> {
    let x = set.base();
    if model.base() != x {
        return Err(Error::InvalidArgument("model and set have different base points".into()));
    }
    if f.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: f.dim() });
    }
    let delta = set.radius();
    let p = set.len();
    let constants = fully_linear_constants(opts.kind, p, opts.lambda, opts.lipschitz, opts.beta);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut max_value_error: f64 = set
        .points()
        .iter()
        .chain(std::iter::once(x))
        .map(|y| (f.value(y) - model.eval(y)).abs())
        .fold(0.0, f64::max);
    for _ in 0..opts.samples {
        let y = region.sample_in_ball(x, delta, &mut rng, 100)?;
        max_value_error = max_value_error.max((f.value(&y) - model.eval(&y)).abs());
    }

    let e: DVector<f64> = f.gradient(x) - model.g();
    let mut max_gradient_error = criticality_measure(&e, x, region, 1.0)?
        .value
        .max(criticality_measure(&(-&e), x, region, 1.0)?.value);
    for _ in 0..opts.samples {
        let y = region.sample_in_ball(x, 1.0, &mut rng, 100)?;
        max_gradient_error = max_gradient_error.max(e.dot(&(y - x)).abs());
    }

    let r = set.scale();
    let (max_hessian_term, ratio_hessian) = match constants.kappa_h {
        Some(kh) => {
            let h = model.hessian();
            let disp: Vec<DVector<f64>> = (0..p).map(|t| set.displacement(t)).collect();
            let worst = disp
                .iter()
                .flat_map(|ds| disp.iter().map(move |dt| ds.dot(&(h * dt)).abs()))
                .fold(0.0, f64::max);
            (Some(worst), Some(ratio(worst, kh * opts.beta * opts.beta * r * r)))
        }
        None => (None, None),
    };

    Ok(BoundReport {
        constants,
        lipschitz: opts.lipschitz,
        lambda: opts.lambda,
        beta: opts.beta,
        delta,
        samples: opts.samples,
        ratio_value: ratio(max_value_error, constants.kappa_ef * delta * delta),
        ratio_gradient: ratio(max_gradient_error, constants.kappa_eg * delta),
        max_value_error,
        max_gradient_error,
        max_hessian_term,
        ratio_hessian,
    })
}
