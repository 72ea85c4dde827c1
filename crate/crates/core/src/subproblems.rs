//! The criticality measure and the trust-region step.

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::ConvexRegion;
use crate::linalg::to_vec;
use crate::quadratic_models::QuadraticModel;

/// Iterations of the projected subgradient route.
pub const SUBGRADIENT_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalityResult {
    /// `|min gᵀd|` over `‖d‖ ≤ radius`, `x + d ∈ C`.
    pub value: f64,
    pub minimizer: DVector<f64>,
    pub iterations: usize,
    /// Disagreement between the two solution routes.
    pub gap_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionStep {
    pub step: DVector<f64>,
    /// `m(x) − m(x + s)`.
    pub predicted_reduction: f64,
    pub cauchy_constant_used: f64,
    /// Right-hand side `c₁ π min(π/(1+‖H‖), Δ, 1)` of the decrease condition.
    pub cauchy_target: f64,
    pub satisfied_cauchy: bool,
    pub criticality: f64,
}

fn check_point(region: &ConvexRegion, x: &DVector<f64>) -> Result<()> {
    if x.len() != region.dim() {
        return Err(Error::DimensionMismatch { expected: region.dim(), got: x.len() });
    }
    if !region.is_feasible(x) {
        return Err(Error::Infeasible { x: to_vec(x) });
    }
    Ok(())
}

/// Largest `t` with `‖proj_C(x − t g) − x‖ ≤ radius`, found by doubling and
/// bisection. The displacement norm is nondecreasing in `t`, and the
/// displacement at that `t` minimizes `gᵀd` over the feasible ball.
fn criticality_by_bisection(
    g: &DVector<f64>,
    x: &DVector<f64>,
    region: &ConvexRegion,
    radius: f64,
) -> Result<(DVector<f64>, usize)> {
    let gn = g.norm();
    let t_max = 1e14 * radius / gn;
    let d_of = |t: f64| -> Result<DVector<f64>> { Ok(region.project(&(x - g * t))?.point - x) };
    let mut iterations = 0;
    // Nonexpansiveness gives ‖d(radius/‖g‖)‖ ≤ radius.
    let mut lo = radius / gn;
    let mut d_lo = d_of(lo)?;
    let mut hi = 2.0 * lo;
    loop {
        iterations += 1;
        let d = d_of(hi)?;
        if d.norm() > radius {
            break;
        }
        // The displacement has reached its limit, a point of C within the
        // ball; doubling further only loses accuracy to the size of x − t g.
        let settled = (&d - &d_lo).norm() <= 1e-13 * radius;
        lo = hi;
        d_lo = d;
        if settled || hi >= t_max {
            return Ok((d_lo, iterations));
        }
        hi = (2.0 * hi).min(t_max);
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let d = d_of(mid)?;
        if d.norm() > radius {
            hi = mid;
        } else {
            lo = mid;
            d_lo = d;
        }
    }
    Ok((d_lo, iterations))
}

/// Projected subgradient descent on `gᵀd` over the feasible ball, warm
/// started at the projected steepest-descent direction, tracking the best
/// iterate and the running average.
fn criticality_by_subgradient(
    g: &DVector<f64>,
    x: &DVector<f64>,
    region: &ConvexRegion,
    radius: f64,
) -> Result<DVector<f64>> {
    let gn = g.norm();
    let proj_k = |d: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(region.project_onto_ball_intersection(x, radius, &(x + d))?.point - x)
    };
    let mut d = proj_k(&(g * (-radius / gn)))?;
    let mut best = d.clone();
    let mut best_val = g.dot(&d);
    let mut avg = d.clone();
    for j in 0..SUBGRADIENT_ITERS {
        let alpha = radius / (gn * ((j + 1) as f64).sqrt());
        d = proj_k(&(&d - g * alpha))?;
        let v = g.dot(&d);
        if v < best_val {
            best_val = v;
            best = d.clone();
        }
        avg += (&d - &avg) / (j + 2) as f64;
    }
    if g.dot(&avg) < best_val {
        best = avg;
    }
    Ok(best)
}

/// `π = |min gᵀd|` over `{d : ‖d‖ ≤ radius, x + d ∈ C}`.
pub fn criticality_measure(
    g: &DVector<f64>,
    x: &DVector<f64>,
    region: &ConvexRegion,
    radius: f64,
) -> Result<CriticalityResult> {
    check_point(region, x)?;
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: g.len() });
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let gn = g.norm();
    if gn == 0.0 {
        return Ok(CriticalityResult { value: 0.0, minimizer: DVector::zeros(x.len()), iterations: 0, gap_estimate: 0.0 });
    }
    if region.is_whole_space() {
        return Ok(CriticalityResult {
            value: radius * gn,
            minimizer: g * (-radius / gn),
            iterations: 0,
            gap_estimate: 0.0,
        });
    }
    let (d_exact, iterations) = criticality_by_bisection(g, x, region, radius)?;
    let d_sub = criticality_by_subgradient(g, x, region, radius)?;
    let (v_exact, v_sub) = (g.dot(&d_exact), g.dot(&d_sub));
    let best = if v_sub < v_exact { d_sub } else { d_exact };
    // Remove rounding drift; a no-op up to rounding for feasible directions.
    let minimizer = region.project_onto_ball_intersection(x, radius, &(x + &best))?.point - x;
    let value = g.dot(&minimizer).min(0.0).abs();
    Ok(CriticalityResult {
        value,
        minimizer,
        iterations: iterations + SUBGRADIENT_ITERS,
        gap_estimate: (v_exact - v_sub).abs(),
    })
}

/// Approximate minimizer of `m(x + s)` over `‖s‖ ≤ Δ`, `x + s ∈ C`.
///
/// A backtracking search along the projected-gradient path secures the
/// generalized Cauchy decrease; a Newton candidate and projected-gradient
/// refinement then improve on it.
pub fn solve_trust_region_step(
    model: &QuadraticModel,
    x: &DVector<f64>,
    region: &ConvexRegion,
    delta: f64,
    c1: f64,
) -> Result<TrustRegionStep> {
    check_point(region, x)?;
    if model.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: model.dim() });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("trust-region radius must be positive, got {delta}")));
    }
    let n = x.len();
    let g = model.gradient_at(x);
    let h = model.hessian();
    let pi = criticality_measure(&g, x, region, 1.0)?.value;
    let h_norm = model.hessian_norm();
    let target = c1 * pi * (pi / (1.0 + h_norm)).min(delta).min(1.0);
    let zero = TrustRegionStep {
        step: DVector::zeros(n),
        predicted_reduction: 0.0,
        cauchy_constant_used: c1,
        cauchy_target: target,
        satisfied_cauchy: target <= 0.0,
        criticality: pi,
    };
    if pi == 0.0 {
        return Ok(zero);
    }
    // Reduction m(x) − m(x + s) expressed through the expansion at x.
    let reduction = |s: &DVector<f64>| -(g.dot(s) + 0.5 * s.dot(&(h * s)));
    let proj = |y: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(region.project_onto_ball_intersection(x, delta, y)?.point - x)
    };

    let mut best = DVector::zeros(n);
    let mut best_red = 0.0;
    let gn = g.norm();
    let mut gamma = delta / gn;
    for _ in 0..=50 {
        let s = proj(&(x - &g * gamma))?;
        let red = reduction(&s);
        if red > best_red {
            best_red = red;
            best = s;
        }
        if best_red >= target {
            break;
        }
        gamma *= 0.5;
    }

    let eig = SymmetricEigen::new(h.clone());
    if eig.eigenvalues.min() > 0.0 {
        let inv = &eig.eigenvectors
            * nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l))
            * eig.eigenvectors.transpose();
        let s_newton = -(&inv * &g);
        if s_newton.norm() <= delta && region.is_feasible(&(x + &s_newton)) {
            let red = reduction(&s_newton);
            if red > best_red {
                best_red = red;
                best = s_newton;
            }
        }
    }

    let mut s = best.clone();
    let mut s_prev: Option<(DVector<f64>, DVector<f64>)> = None;
    for _ in 0..100 {
        let gs = &g + h * &s;
        let mut a = delta / gs.norm().max(f64::MIN_POSITIVE);
        if let Some((ps, pg)) = &s_prev {
            let ds = &s - ps;
            let dg = &gs - pg;
            let curv = ds.dot(&dg);
            if curv > 0.0 {
                a = ds.norm_squared() / curv;
            }
        }
        let trial = proj(&(x + &s - &gs * a))?;
        let dir = &trial - &s;
        if dir.norm() <= 1e-14 * (1.0 + delta) {
            break;
        }
        let slope = gs.dot(&dir);
        if slope >= 0.0 {
            break;
        }
        let curv = dir.dot(&(h * &dir));
        let lam = if curv > 0.0 { (-slope / curv).min(1.0) } else { 1.0 };
        s_prev = Some((s.clone(), gs));
        s += dir * lam;
        let red = reduction(&s);
        if red > best_red {
            let gain = red - best_red;
            best_red = red;
            best = s.clone();
            if gain <= 1e-15 * (1.0 + best_red.abs()) {
                break;
            }
        } else {
            break;
        }
    }

    if best_red <= 0.0 {
        return Ok(zero);
    }
    Ok(TrustRegionStep {
        satisfied_cauchy: best_red >= target,
        step: best,
        predicted_reduction: best_red,
        cauchy_constant_used: c1,
        cauchy_target: target,
        criticality: pi,
    })
}
