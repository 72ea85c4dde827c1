//! Geometry of sample sets: checking and enforcing Λ-poisedness.
//!
//! A set is Λ-poised when every Lagrange polynomial satisfies
//! `|ℓ_t(y)| ≤ Λ` on `B(x, min(Δ,1)) ∩ C`. The maximum is estimated by
//! multi-start projected-gradient ascent, so a reported violation is always
//! genuine while a pass depends on the search finding the true maximum.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, ModelKind};
use crate::error::{Error, Result};
use crate::geometry::ConvexRegion;
use crate::linalg::to_vec;
use crate::quadratic_models::QuadraticModel;
use crate::set::InterpolationSet;

/// Lagrange values below this are treated as zero when repairing infeasible points.
pub const NONZERO_LAGRANGE_TOL: f64 = 1e-8;

/// Relative slack on distance checks `‖y_t − x‖ ≤ β min(Δ,1)`.
const DISTANCE_SLACK: f64 = 1e-9;

/// Settings for the Lagrange maximization subsolver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeSearch {
    pub random_starts: usize,
    pub max_iters: usize,
    pub pg_tol: f64,
    pub seed: u64,
}

impl Default for LagrangeSearch {
    fn default() -> Self {
        LagrangeSearch { random_starts: 20, max_iters: 200, pg_tol: 1e-8, seed: 0 }
    }
}

impl LagrangeSearch {
    fn rng(&self, t: usize, salt: u64) -> ChaCha8Rng {
        let mixed = self.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.rotate_left(32);
        ChaCha8Rng::seed_from_u64(mixed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeMax {
    /// `|ℓ_t|` at `point`.
    pub value: f64,
    pub signed_value: f64,
    pub point: DVector<f64>,
    pub starts_used: usize,
    pub early_exit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub starts_used: usize,
    pub best_per_polynomial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisednessCertificate {
    pub lambda_target: f64,
    pub lambda_observed: f64,
    pub witness_index: Option<usize>,
    pub witness_point: Option<Vec<f64>>,
    /// All points feasible and within `β min(Δ,1)` of the base.
    pub geometry_ok: bool,
    pub verified: bool,
    pub reason: Option<String>,
    pub stats: SearchStats,
}

/// One accepted point swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRecord {
    pub index: usize,
    pub old_point: Vec<f64>,
    pub new_point: Vec<f64>,
    pub lagrange_value: f64,
    pub log_volume_before: f64,
    /// Predicted by the rank-3 determinant update; interpolation only.
    pub predicted_log_volume: Option<f64>,
    pub log_volume_after: f64,
}

#[derive(Debug, Clone)]
pub struct ImproveOutcome {
    pub set: InterpolationSet,
    pub certificate: PoisednessCertificate,
    pub swaps: Vec<SwapRecord>,
    /// Replacements made while building a fresh set, if one was built.
    pub initial_replacements: Option<usize>,
}

/// Projected-gradient ascent of `sign · q` over the set behind `proj`.
struct Ascent<'a, P> {
    q: &'a QuadraticModel,
    proj: &'a P,
    radius: f64,
    opts: &'a LagrangeSearch,
    threshold: Option<f64>,
}

impl<P> Ascent<'_, P>
where
    P: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    /// Returns `(sign·q(y), y, hit_threshold)`.
    fn run(&self, sign: f64, start: &DVector<f64>) -> Result<(f64, DVector<f64>, bool)> {
        let mut y = (self.proj)(start)?;
        let mut val = sign * self.q.eval(&y);
        let hit = |v: f64| self.threshold.is_some_and(|th| v > th);
        if hit(val) {
            return Ok((val, y, true));
        }
        let mut step_len: Option<f64> = None;
        for _ in 0..self.opts.max_iters {
            let grad = self.q.gradient_at(&y) * sign;
            let gn = grad.norm();
            if gn == 0.0 {
                break;
            }
            let mut a = step_len.unwrap_or(self.radius / gn);
            let mut accepted = None;
            for _ in 0..50 {
                let trial = (self.proj)(&(&y + &grad * a))?;
                let moved = &trial - &y;
                // Below this the change in q is rounding noise.
                if moved.norm() <= 1e-12 * self.radius {
                    break;
                }
                let v = sign * self.q.eval(&trial);
                if v >= val + 1e-4 * grad.dot(&moved) {
                    accepted = Some((trial, v, moved.norm() / a));
                    break;
                }
                a *= 0.5;
            }
            let Some((trial, v, pg)) = accepted else { break };
            let gain = v - val;
            let step = pg * a;
            y = trial;
            val = v;
            if hit(val) {
                return Ok((val, y, true));
            }
            if pg <= self.opts.pg_tol || gain <= 1e-15 * (1.0 + val.abs()) || step <= 1e-10 * self.radius {
                break;
            }
            step_len = Some(2.0 * a);
        }
        Ok((val, y, false))
    }
}

/// Candidate starting points inside `C ∩ B(x, r)`.
fn starting_points<P>(
    basis: &Basis,
    region: &ConvexRegion,
    x: &DVector<f64>,
    r: f64,
    proj: &P,
    opts: &LagrangeSearch,
    t: usize,
) -> Result<Vec<DVector<f64>>>
where
    P: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(basis.len() + 2 * n + opts.random_starts);
    for y in basis.set().points() {
        starts.push(proj(y)?);
    }
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut y = x.clone();
            y[i] += sign * r;
            starts.push(proj(&y)?);
        }
    }
    let mut rng = opts.rng(t, 1);
    for _ in 0..opts.random_starts {
        starts.push(region.sample_in_ball(x, r, &mut rng, 50)?);
    }
    Ok(starts)
}

/// Estimate `max |ℓ_t(y)|` over `C ∩ B(x, min(Δ,1))`.
pub fn maximize_abs_lagrange(
    basis: &Basis,
    t: usize,
    region: &ConvexRegion,
    x: &DVector<f64>,
    delta: f64,
    early_exit_at: Option<f64>,
    opts: &LagrangeSearch,
) -> Result<LagrangeMax> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {delta}")));
    }
    let r = delta.min(1.0);
    let q = basis.lagrange_polynomial(t)?;
    let proj = |y: &DVector<f64>| region.project_onto_ball_intersection(x, r, y).map(|p| p.point);
    let ascent = Ascent { q: &q, proj: &proj, radius: r, opts, threshold: early_exit_at };
    let starts = starting_points(basis, region, x, r, &proj, opts, t)?;
    let mut best = LagrangeMax { value: -1.0, signed_value: 0.0, point: x.clone(), starts_used: 0, early_exit: false };
    for start in &starts {
        best.starts_used += 1;
        for sign in [1.0, -1.0] {
            let (v, y, hit) = ascent.run(sign, start)?;
            if v > best.value {
                best.value = v;
                best.signed_value = sign * v;
                best.point = y;
            }
            if hit {
                best.early_exit = true;
                return Ok(best);
            }
        }
    }
    best.value = best.value.max(0.0);
    Ok(best)
}

/// `‖y − x‖ ≤ bound` up to relative slack and the rounding of coordinates
/// of size `‖x‖∞`.
fn within_distance(y: &DVector<f64>, x: &DVector<f64>, bound: f64) -> bool {
    let rounding = 4.0 * f64::EPSILON * (x.amax() + bound) * (x.len() as f64).sqrt();
    (y - x).norm() <= bound * (1.0 + DISTANCE_SLACK) + rounding
}

fn distances_ok(set: &InterpolationSet, x: &DVector<f64>, r: f64, beta: f64) -> bool {
    set.points().iter().all(|y| within_distance(y, x, beta * r))
}

fn geometry_reason(set: &InterpolationSet, region: &ConvexRegion, r: f64, beta: f64) -> Option<String> {
    let x = set.base();
    if let Some(t) = set.points().iter().position(|y| !region.is_feasible(y)) {
        return Some(format!("point {t} is infeasible"));
    }
    if !distances_ok(set, x, r, beta) {
        return Some(format!("a point lies farther than {beta} min(delta,1) from the base"));
    }
    None
}

/// Check Λ-poisedness of a factorized set.
///
/// Each polynomial is searched with early exit at `Λ`. `Λ < 1` is rejected.
pub fn check_basis_poisedness(
    basis: &Basis,
    region: &ConvexRegion,
    lambda: f64,
    beta: f64,
    opts: &LagrangeSearch,
) -> Result<PoisednessCertificate> {
    if !(lambda >= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must be at least 1, got {lambda}")));
    }
    let set = basis.set();
    let x = set.base();
    let r = set.scale();
    let reason = geometry_reason(set, region, r, beta);
    let geometry_ok = reason.is_none();
    let mut cert = PoisednessCertificate {
        lambda_target: lambda,
        lambda_observed: 0.0,
        witness_index: None,
        witness_point: None,
        geometry_ok,
        verified: false,
        reason,
        stats: SearchStats { starts_used: 0, best_per_polynomial: Vec::with_capacity(set.len()) },
    };
    for t in 0..set.len() {
        let m = maximize_abs_lagrange(basis, t, region, x, set.radius(), Some(lambda), opts)?;
        cert.stats.starts_used += m.starts_used;
        cert.stats.best_per_polynomial.push(m.value);
        if m.value > cert.lambda_observed || cert.witness_index.is_none() {
            cert.lambda_observed = m.value;
            cert.witness_index = Some(t);
            cert.witness_point = Some(to_vec(&m.point));
        }
        if m.value > lambda {
            cert.reason.get_or_insert_with(|| format!("|l_{t}| reaches {:.6e} > {lambda}", m.value));
            return Ok(cert);
        }
    }
    cert.verified = geometry_ok;
    Ok(cert)
}

/// Check Λ-poisedness of a raw set. A singular or rank-deficient set yields
/// an unverified certificate carrying the reason.
pub fn check_poisedness(
    kind: ModelKind,
    set: &InterpolationSet,
    region: &ConvexRegion,
    lambda: f64,
    beta: f64,
    opts: &LagrangeSearch,
) -> Result<PoisednessCertificate> {
    if !(lambda >= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must be at least 1, got {lambda}")));
    }
    match Basis::build(kind, set) {
        Ok(basis) => check_basis_poisedness(&basis, region, lambda, beta, opts),
        Err(e @ (Error::SingularGeometry(_) | Error::DegenerateGeometry { .. })) => {
            let reason = geometry_reason(set, region, set.scale(), beta);
            Ok(PoisednessCertificate {
                lambda_target: lambda,
                lambda_observed: f64::INFINITY,
                witness_index: None,
                witness_point: None,
                geometry_ok: reason.is_none(),
                verified: false,
                reason: Some(e.to_string()),
                stats: SearchStats { starts_used: 0, best_per_polynomial: Vec::new() },
            })
        }
        Err(e) => Err(e),
    }
}

/// The structured set `x`, `x ± r e_i`, then `x + (r/√2)(e_s + e_t)` for
/// `s < t` in lexicographic order, truncated to `p` points.
///
/// Cross points are scaled by `1/√2` so every point stays in `B(x, r)`.
pub fn structured_points(x: &DVector<f64>, r: f64, p: usize) -> Vec<DVector<f64>> {
    let n = x.len();
    let mut pts = vec![x.clone()];
    for sign in [1.0, -1.0] {
        for i in 0..n {
            let mut y = x.clone();
            y[i] += sign * r;
            pts.push(y);
        }
    }
    let h = r / std::f64::consts::SQRT_2;
    for s in 0..n {
        for t in s + 1..n {
            let mut y = x.clone();
            y[s] += h;
            y[t] += h;
            pts.push(y);
        }
    }
    pts.truncate(p);
    pts
}

/// Build a set with invertible geometry whose points all lie in
/// `C ∩ B(x, min(Δ,1))`. Returns the set and the number of replacements.
pub fn initial_invertible_set(
    kind: ModelKind,
    region: &ConvexRegion,
    x: &DVector<f64>,
    delta: f64,
    p: usize,
    opts: &LagrangeSearch,
) -> Result<(InterpolationSet, usize)> {
    let n = x.len();
    if region.dim() != n {
        return Err(Error::DimensionMismatch { expected: region.dim(), got: n });
    }
    kind.check_points(n, p)?;
    if !region.is_feasible(x) {
        return Err(Error::Infeasible { x: to_vec(x) });
    }
    let r = delta.min(1.0);
    let mut set = InterpolationSet::new(x.clone(), delta, structured_points(x, r, p))?;
    let mut basis = Basis::build(kind, &set)?;
    let mut replacements = 0;
    for t in 0..p {
        if region.is_feasible(set.point(t)) {
            continue;
        }
        let best = maximize_abs_lagrange(&basis, t, region, x, delta, None, opts)?;
        if best.value <= NONZERO_LAGRANGE_TOL {
            return Err(Error::RegionTooThin { index: t, best: best.value });
        }
        set.replace(t, best.point, None)?;
        basis = Basis::build(kind, &set)?;
        replacements += 1;
    }
    Ok((set, replacements))
}

fn needs_reinit(kind: ModelKind, set: &InterpolationSet, region: &ConvexRegion, p: usize) -> Option<String> {
    if set.len() != p {
        return Some(format!("set has {} points, expected {p}", set.len()));
    }
    if let Some(reason) = geometry_reason(set, region, set.scale(), 1.0) {
        return Some(reason);
    }
    Basis::build(kind, set).err().map(|e| e.to_string())
}

/// Make a set Λ-poised by greedy point swaps.
///
/// Without a usable input set (missing, singular, infeasible, or with
/// points outside `B(x, min(Δ,1))`) a fresh set is built first. Each round
/// maximizes every `|ℓ_t|` and swaps in the largest violator; the round
/// with no violation is returned as the certificate.
#[allow(clippy::too_many_arguments)]
pub fn improve_to_poised(
    kind: ModelKind,
    set: Option<&InterpolationSet>,
    region: &ConvexRegion,
    x: &DVector<f64>,
    delta: f64,
    p: usize,
    lambda: f64,
    opts: &LagrangeSearch,
) -> Result<ImproveOutcome> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must exceed 1, got {lambda}")));
    }
    kind.check_points(x.len(), p)?;
    if !region.is_feasible(x) {
        return Err(Error::Infeasible { x: to_vec(x) });
    }
    let recentered = match set {
        Some(s) => Some(s.recentered(x.clone(), delta)?.without_values()),
        None => None,
    };
    let reinit = match &recentered {
        None => Some("no input set".to_string()),
        Some(s) => needs_reinit(kind, s, region, p),
    };
    let (mut work, initial_replacements) = match (reinit, recentered) {
        (None, Some(s)) => (s, None),
        (reason, _) => {
            log::debug!("rebuilding sample set: {}", reason.unwrap_or_default());
            let (s, k) = initial_invertible_set(kind, region, x, delta, p, opts)?;
            (s, Some(k))
        }
    };
    let cap = 100 * p;
    let mut swaps = Vec::new();
    let mut basis = Basis::build(kind, &work)?;
    loop {
        let mut best: Option<(usize, LagrangeMax)> = None;
        let mut per_poly = Vec::with_capacity(p);
        let mut starts = 0;
        for t in 0..p {
            let m = maximize_abs_lagrange(&basis, t, region, x, delta, None, opts)?;
            starts += m.starts_used;
            per_poly.push(m.value);
            if best.as_ref().is_none_or(|(_, b)| m.value > b.value) {
                best = Some((t, m));
            }
        }
        let (t, m) = best.expect("p >= 1");
        if m.value <= lambda {
            let reason = geometry_reason(&work, region, work.scale(), 1.0);
            let certificate = PoisednessCertificate {
                lambda_target: lambda,
                lambda_observed: m.value,
                witness_index: Some(t),
                witness_point: Some(to_vec(&m.point)),
                geometry_ok: reason.is_none(),
                verified: reason.is_none(),
                reason,
                stats: SearchStats { starts_used: starts, best_per_polynomial: per_poly },
            };
            return Ok(ImproveOutcome { set: work, certificate, swaps, initial_replacements });
        }
        if swaps.len() >= cap {
            return Err(Error::SwapCapExceeded { cap, swaps });
        }
        let before = basis.log_volume();
        let predicted = basis.predicted_log_volume(t, &m.point)?;
        let old = to_vec(work.point(t));
        work.replace(t, m.point.clone(), None)?;
        basis = Basis::build(kind, &work)?;
        swaps.push(SwapRecord {
            index: t,
            old_point: old,
            new_point: to_vec(&m.point),
            lagrange_value: m.value,
            log_volume_before: before,
            predicted_log_volume: predicted,
            log_volume_after: basis.log_volume(),
        });
    }
}

/// Replace points farther than `min(Δ,1)` from the base, one at a time, by
/// maximizers of the matching Lagrange polynomial. Points inside the ball
/// are kept. Returns the indices replaced, or `None` when a replacement
/// would make the geometry singular.
pub fn replace_distant_points(
    kind: ModelKind,
    set: &mut InterpolationSet,
    region: &ConvexRegion,
    opts: &LagrangeSearch,
) -> Result<Option<Vec<usize>>> {
    let x = set.base().clone();
    let r = set.scale();
    let mut basis = match Basis::build(kind, set) {
        Ok(b) => b,
        Err(Error::SingularGeometry(_) | Error::DegenerateGeometry { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut replaced: Vec<usize> = Vec::new();
    loop {
        // Farthest offending point first; each index is replaced at most once.
        let far = (0..set.len())
            .filter(|t| !replaced.contains(t) && !within_distance(set.point(*t), &x, r))
            .map(|t| (t, (set.point(t) - &x).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((t, _)) = far else { return Ok(Some(replaced)) };
        let m = maximize_abs_lagrange(&basis, t, region, &x, set.radius(), None, opts)?;
        if m.value <= NONZERO_LAGRANGE_TOL {
            return Ok(None);
        }
        set.replace(t, m.point, None)?;
        basis = match Basis::build(kind, set) {
            Ok(b) => b,
            Err(Error::SingularGeometry(_) | Error::DegenerateGeometry { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        replaced.push(t);
    }
}
