//! Feasible regions and Euclidean projections onto them.
//!
//! A [`ConvexRegion`] is built from boxes, balls and halfspaces, possibly
//! intersected. Single pieces have closed-form projections, and any
//! intersection of boxes and halfspaces is projected exactly by a dual
//! active-set method. Adding one ball is handled exactly by bisection on
//! the ball multiplier; only regions with several balls fall back to
//! Dykstra's alternating projections.

mod parse;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

mod polyhedron;

pub use parse::parse_region;

use polyhedron::Polyhedron;

/// Default membership tolerance; scaled by `1 + ‖y‖` in [`ConvexRegion::is_feasible`].
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Stopping residual for Dykstra sweeps.
pub const DYKSTRA_TOL: f64 = 1e-10;

/// Sweep cap for Dykstra's algorithm.
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;

/// The set `{y : normalᵀy ≤ offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    normal: DVector<f64>,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Result<Self> {
        let nn = normal.norm();
        if !(nn > 0.0) || !nn.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidRegion("halfspace normal must be nonzero and finite".into()));
        }
        Ok(Halfspace { normal, offset })
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn distance(&self, y: &DVector<f64>) -> f64 {
        ((self.normal.dot(y) - self.offset) / self.normal.norm()).max(0.0)
    }

    fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        let excess = self.normal.dot(y) - self.offset;
        if excess <= 0.0 {
            y.clone()
        } else {
            y - &self.normal * (excess / self.normal.norm_squared())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionKind {
    WholeSpace,
    Box { lower: DVector<f64>, upper: DVector<f64> },
    Ball { center: DVector<f64>, radius: f64 },
    Halfspaces(Vec<Halfspace>),
    Intersection(Vec<ConvexRegion>),
}

/// A closed convex set with nonempty interior, given by its projection
/// and membership oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegion {
    kind: RegionKind,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: DVector<f64>,
    pub iterations: usize,
    /// Gap between the last two iterates of an iterative scheme; zero for
    /// closed-form projections.
    pub residual: f64,
}

impl ProjectionResult {
    fn exact(point: DVector<f64>) -> Self {
        ProjectionResult { point, iterations: 0, residual: 0.0 }
    }
}

/// A primitive piece of a region with a closed-form projection.
#[derive(Debug, Clone, Copy)]
enum Atom<'a> {
    Box(&'a DVector<f64>, &'a DVector<f64>),
    Ball(&'a DVector<f64>, f64),
    Half(&'a Halfspace),
}

impl Atom<'_> {
    fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        match *self {
            Atom::Box(lo, hi) => clamp(y, lo, hi),
            Atom::Ball(c, r) => project_ball(y, c, r),
            Atom::Half(h) => h.project(y),
        }
    }

    fn distance(&self, y: &DVector<f64>) -> f64 {
        match *self {
            Atom::Box(lo, hi) => (clamp(y, lo, hi) - y).norm(),
            Atom::Ball(c, r) => ((y - c).norm() - r).max(0.0),
            Atom::Half(h) => h.distance(y),
        }
    }

    fn is_ball(&self) -> bool {
        matches!(self, Atom::Ball(..))
    }
}

/// The linear pieces of `atoms` as one polyhedron.
fn polyhedron(atoms: &[Atom<'_>]) -> Polyhedron {
    let mut poly = Polyhedron::new();
    for atom in atoms {
        match *atom {
            Atom::Box(lo, hi) => poly.push_box(lo, hi),
            Atom::Half(h) => poly.push(&h.normal, h.offset),
            Atom::Ball(..) => {}
        }
    }
    poly
}

fn clamp(y: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(y.len(), |i, _| y[i].max(lo[i]).min(hi[i]))
}

fn project_ball(y: &DVector<f64>, c: &DVector<f64>, r: f64) -> DVector<f64> {
    let d = y - c;
    let nd = d.norm();
    if nd <= r {
        y.clone()
    } else {
        c + d * (r / nd)
    }
}

impl ConvexRegion {
    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRegion("dimension must be positive".into()));
        }
        Ok(ConvexRegion { kind: RegionKind::WholeSpace, dim })
    }

    /// Box `lower ≤ y ≤ upper`. Infinite bounds are allowed.
    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() {
            return Err(Error::InvalidRegion("dimension must be positive".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u) || l.is_nan() || u.is_nan()) {
            return Err(Error::InvalidRegion("box requires lower <= upper".into()));
        }
        if !lower.iter().zip(upper.iter()).any(|(l, u)| l < u) {
            return Err(Error::InvalidRegion("box has empty interior".into()));
        }
        let dim = lower.len();
        Ok(ConvexRegion { kind: RegionKind::Box { lower, upper }, dim })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::boxed(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidRegion("ball radius must be positive".into()));
        }
        if center.is_empty() {
            return Err(Error::InvalidRegion("dimension must be positive".into()));
        }
        let dim = center.len();
        Ok(ConvexRegion { kind: RegionKind::Ball { center, radius }, dim })
    }

    pub fn halfspaces(list: Vec<Halfspace>) -> Result<Self> {
        let dim = list
            .first()
            .map(|h| h.normal.len())
            .ok_or_else(|| Error::InvalidRegion("empty halfspace list".into()))?;
        if let Some(h) = list.iter().find(|h| h.normal.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: h.normal.len() });
        }
        Ok(ConvexRegion { kind: RegionKind::Halfspaces(list), dim })
    }

    pub fn halfspace(normal: DVector<f64>, offset: f64) -> Result<Self> {
        Self::halfspaces(vec![Halfspace::new(normal, offset)?])
    }

    pub fn intersection(members: Vec<ConvexRegion>) -> Result<Self> {
        let dim = members
            .first()
            .map(|m| m.dim)
            .ok_or_else(|| Error::InvalidRegion("empty intersection".into()))?;
        if let Some(m) = members.iter().find(|m| m.dim != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: m.dim });
        }
        Ok(ConvexRegion { kind: RegionKind::Intersection(members), dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    pub fn is_whole_space(&self) -> bool {
        self.atoms().is_empty()
    }

    fn atoms(&self) -> Vec<Atom<'_>> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<Atom<'a>>) {
        match &self.kind {
            RegionKind::WholeSpace => {}
            RegionKind::Box { lower, upper } => out.push(Atom::Box(lower, upper)),
            RegionKind::Ball { center, radius } => out.push(Atom::Ball(center, *radius)),
            RegionKind::Halfspaces(hs) => out.extend(hs.iter().map(Atom::Half)),
            RegionKind::Intersection(ms) => ms.iter().for_each(|m| m.collect_atoms(out)),
        }
    }

    /// Whether [`project`](Self::project) is computed without Dykstra
    /// sweeps, which holds when the region has at most one ball.
    pub fn has_exact_projection(&self) -> bool {
        self.atoms().iter().filter(|a| a.is_ball()).count() <= 1
    }

    fn check_dim(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: y.len() });
        }
        Ok(())
    }

    /// Euclidean projection of `y` onto the region.
    pub fn project(&self, y: &DVector<f64>) -> Result<ProjectionResult> {
        self.check_dim(y)?;
        let atoms = self.atoms();
        if atoms.len() <= 1 {
            return Ok(ProjectionResult::exact(atoms.first().map_or_else(|| y.clone(), |a| a.project(y))));
        }
        let balls: Vec<&Atom<'_>> = atoms.iter().filter(|a| a.is_ball()).collect();
        match balls[..] {
            [] => polyhedron(&atoms).project(y),
            [&Atom::Ball(c, r)] => {
                let linear: Vec<Atom<'_>> = atoms.iter().filter(|a| !a.is_ball()).copied().collect();
                if let [Atom::Box(lo, hi)] = linear[..] {
                    if in_box(c, lo, hi) {
                        return Ok(ProjectionResult::exact(project_box_ball(lo, hi, c, r, y)));
                    }
                }
                let poly = polyhedron(&linear);
                project_with_ball(|w| poly.project(w).map(|p| p.point), c, r, y)
            }
            _ => dykstra(&atoms, y),
        }
    }

    /// Projection onto the region intersected with the ball `B(center, radius)`.
    pub fn project_onto_ball_intersection(
        &self,
        center: &DVector<f64>,
        radius: f64,
        y: &DVector<f64>,
    ) -> Result<ProjectionResult> {
        self.check_dim(y)?;
        self.check_dim(center)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
        }
        let atoms = self.atoms();
        if atoms.is_empty() {
            return Ok(ProjectionResult::exact(project_ball(y, center, radius)));
        }
        if let [Atom::Box(lo, hi)] = atoms[..] {
            if in_box(center, lo, hi) {
                return Ok(ProjectionResult::exact(project_box_ball(lo, hi, center, radius, y)));
            }
        }
        if self.has_exact_projection() {
            return project_with_ball(|w| self.project(w).map(|p| p.point), center, radius, y);
        }
        let mut with_ball = atoms;
        with_ball.push(Atom::Ball(center, radius));
        dykstra(&with_ball, y)
    }

    /// Euclidean distance from `y` to the region.
    pub fn distance(&self, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(y)?;
        let atoms = self.atoms();
        if atoms.len() <= 1 {
            return Ok(atoms.first().map_or(0.0, |a| a.distance(y)));
        }
        let worst = atoms.iter().map(|a| a.distance(y)).fold(0.0, f64::max);
        if worst == 0.0 {
            return Ok(0.0);
        }
        Ok((self.project(y)?.point - y).norm())
    }

    /// True iff the distance from `y` to the region is at most `tol`.
    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        if y.len() != self.dim {
            return false;
        }
        let atoms = self.atoms();
        let worst = atoms.iter().map(|a| a.distance(y)).fold(0.0, f64::max);
        if worst == 0.0 || atoms.len() <= 1 {
            return worst <= tol;
        }
        if worst > tol {
            return false;
        }
        match self.project(y) {
            Ok(p) => (p.point - y).norm() <= tol,
            // Every piece is within tolerance; accept on the necessary condition.
            Err(_) => true,
        }
    }

    /// Membership with the default tolerance `1e-9 (1 + ‖y‖)`.
    pub fn is_feasible(&self, y: &DVector<f64>) -> bool {
        self.contains(y, MEMBERSHIP_TOL * (1.0 + y.norm()))
    }

    /// Random point of `region ∩ B(center, radius)`: uniform in the ball with
    /// rejection, falling back to projecting the last draw.
    pub fn sample_in_ball<R: Rng + ?Sized>(
        &self,
        center: &DVector<f64>,
        radius: f64,
        rng: &mut R,
        max_rejections: usize,
    ) -> Result<DVector<f64>> {
        let mut last = center.clone();
        for _ in 0..max_rejections.max(1) {
            last = uniform_in_ball(center, radius, rng);
            if self.is_feasible(&last) {
                return Ok(last);
            }
        }
        Ok(self.project_onto_ball_intersection(center, radius, &last)?.point)
    }
}

/// Uniform sample from `B(center, radius)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(center: &DVector<f64>, radius: f64, rng: &mut R) -> DVector<f64> {
    let n = center.len();
    let mut dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let nd = dir.norm();
    if nd == 0.0 {
        return center.clone();
    }
    dir /= nd;
    let u: f64 = rng.random::<f64>();
    center + dir * (radius * u.powf(1.0 / n as f64))
}

/// Projection onto `R ∩ B(c, r)` where `inner` projects onto `R`.
///
/// For `μ ≥ 0` the minimizer of `‖z − y‖² + μ‖z − c‖²` over `R` is
/// `inner(c + (y − c)/(1 + μ))`, and its distance to `c` is nonincreasing in
/// `μ`. The projection is the point at the smallest `μ` for which that
/// distance is at most `r`.
fn project_with_ball<F>(inner: F, c: &DVector<f64>, r: f64, y: &DVector<f64>) -> Result<ProjectionResult>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let z0 = inner(y)?;
    if (&z0 - c).norm() <= r {
        return Ok(ProjectionResult::exact(z0));
    }
    let shifted = y - c;
    let eval = |mu: f64| -> Result<(DVector<f64>, f64)> {
        let w = c + &shifted / (1.0 + mu);
        let z = inner(&w)?;
        let d = (&z - c).norm();
        Ok((z, d))
    };
    let mut iterations = 0;
    let (mut lo, mut z_lo) = (0.0, z0);
    let mut hi = 1.0;
    let (mut z_hi, mut d_hi) = eval(hi)?;
    while d_hi > r {
        iterations += 1;
        lo = hi;
        z_lo = z_hi;
        hi *= 4.0;
        if hi > 1e300 {
            return Err(Error::EmptyIntersection);
        }
        (z_hi, d_hi) = eval(hi)?;
    }
    // Regula falsi with the Illinois modification on ψ(μ) = ‖z(μ) − c‖ − r,
    // keeping the feasible end of the bracket.
    let (mut f_lo, mut f_hi) = ((&z_lo - c).norm() - r, d_hi - r);
    let mut last_side = 0i8;
    let mut converged_by_value = false;
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if -f_hi <= 1e-15 * r.max(1.0) {
            converged_by_value = true;
            break;
        }
        iterations += 1;
        let mut mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let (z, d) = eval(mid)?;
        let fm = d - r;
        if fm > 0.0 {
            lo = mid;
            z_lo = z;
            f_lo = fm;
            if last_side == -1 {
                f_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = mid;
            z_hi = z;
            f_hi = fm;
            if last_side == 1 {
                f_lo *= 0.5;
            }
            last_side = 1;
        }
    }
    let residual = if converged_by_value { r - (&z_hi - c).norm() } else { (&z_hi - &z_lo).norm() };
    Ok(ProjectionResult { point: z_hi, iterations, residual: residual.max(0.0) })
}

/// Exact projection onto `[lo, hi] ∩ B(c, r)` for `c` in the box.
///
/// The minimizer has the form `clamp(c + τ(y − c))` for some `τ ∈ (0, 1]`,
/// and `‖clamp(c + τw) − c‖²` is piecewise `aτ² + b` between the points
/// where coordinates hit their bounds, so `τ` is found by a sorted sweep.
fn project_box_ball(lo: &DVector<f64>, hi: &DVector<f64>, c: &DVector<f64>, r: f64, y: &DVector<f64>) -> DVector<f64> {
    let z0 = clamp(y, lo, hi);
    if (&z0 - c).norm() <= r {
        return z0;
    }
    let n = y.len();
    let w = y - c;
    // (breakpoint, squared clamped offset, w_i²)
    let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(n);
    let mut free = 0.0;
    let mut fixed = 0.0;
    for i in 0..n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let gap = if wi > 0.0 { hi[i] - c[i] } else { lo[i] - c[i] };
        let b = gap / wi;
        if b <= 0.0 {
            fixed += gap * gap;
        } else {
            free += wi * wi;
            if b.is_finite() {
                events.push((b, gap * gap, wi * wi));
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let r2 = r * r;
    let mut tau = 1.0;
    for &(b, gap2, wi2) in &events {
        // Value at the end of the current segment.
        if b * b * free + fixed >= r2 || b >= 1.0 {
            break;
        }
        free -= wi2;
        fixed += gap2;
    }
    if free > 0.0 {
        tau = ((r2 - fixed).max(0.0) / free).sqrt().min(1.0);
    }
    let z = DVector::from_fn(n, |i, _| (c[i] + tau * w[i]).max(lo[i]).min(hi[i]));
    // Guard against rounding pushing the point just outside the ball.
    let d = (&z - c).norm();
    if d > r {
        let zs = c + (&z - c) * (r / d);
        return clamp(&zs, lo, hi);
    }
    z
}

fn in_box(c: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> bool {
    c.iter().zip(lo.iter().zip(hi.iter())).all(|(v, (l, h))| l <= v && v <= h)
}

/// Dykstra's alternating projections with correction terms.
fn dykstra(atoms: &[Atom<'_>], y: &DVector<f64>) -> Result<ProjectionResult> {
    let mut x = y.clone();
    let mut corrections = vec![DVector::zeros(y.len()); atoms.len()];
    let mut residual = f64::INFINITY;
    for sweep in 1..=DYKSTRA_MAX_SWEEPS {
        let start = x.clone();
        for (atom, corr) in atoms.iter().zip(corrections.iter_mut()) {
            let z = &x + &*corr;
            let next = atom.project(&z);
            *corr = z - &next;
            x = next;
        }
        let change = (&x - &start).norm();
        let infeasibility = atoms.iter().map(|a| a.distance(&x)).fold(0.0, f64::max);
        residual = change.max(infeasibility);
        if residual <= DYKSTRA_TOL {
            return Ok(ProjectionResult { point: x, iterations: sweep, residual });
        }
    }
    Err(Error::ProjectionNotConverged { sweeps: DYKSTRA_MAX_SWEEPS, residual })
}
