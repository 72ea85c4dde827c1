//! Trust-region method for convex-constrained derivative-free optimization.
//!
//! Each iteration builds a model from feasible samples, measures
//! criticality, and branches:
//!
//! * **criticality**: the model gradient looks small; shrink `Δ` if the
//!   model is certified fully linear, then make it so;
//! * **successful**: `ρ ≥ η`, move and enlarge `Δ`;
//! * **model-improving**: `ρ < η` with an uncertified model, repair geometry;
//! * **unsuccessful**: `ρ < η` with a certified model, shrink `Δ`.
//!
//! A model counts as fully linear when its sample set is certified
//! Λ-poised with every point within `min(Δ,1)` of the iterate.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, ModelKind};
use crate::error::{Error, Result};
use crate::geometry::ConvexRegion;
use crate::linalg::to_vec;
use crate::poisedness::{
    check_basis_poisedness, improve_to_poised, replace_distant_points, LagrangeSearch, PoisednessCertificate,
};
use crate::quadratic_models::QuadraticModel;
use crate::set::InterpolationSet;
use crate::subproblems::{criticality_measure, solve_trust_region_step};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub delta0: f64,
    pub delta_max: f64,
    pub gamma_dec: f64,
    pub gamma_inc: f64,
    pub eps_c: f64,
    pub mu: f64,
    pub eta: f64,
    pub lambda: f64,
    pub c1: f64,
    pub delta_min: f64,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    pub max_iterations: usize,
    pub model_kind: ModelKind,
    /// Sample count; `None` picks `2n+1` for interpolation, `n+1` for regression.
    pub points: Option<usize>,
    pub seed: u64,
    pub random_starts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta0: 0.1,
            delta_max: 1e3,
            gamma_dec: 0.5,
            gamma_inc: 2.0,
            eps_c: 1e-2,
            mu: 1.0,
            eta: 0.1,
            lambda: 10.0,
            c1: 0.1,
            delta_min: 1e-8,
            budget: 1000,
            max_iterations: 100_000,
            model_kind: ModelKind::MfnQuadratic,
            points: None,
            seed: 0,
            random_starts: 20,
        }
    }
}

impl SolverConfig {
    /// Validate parameter ranges and return the sample count for dimension `n`.
    pub fn validate(&self, n: usize) -> Result<usize> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("solver config: {what}")));
        if !(self.delta0 > 0.0) {
            return bad("delta0 must be positive");
        }
        if !(self.delta_max >= self.delta0) {
            return bad("delta_max must be at least delta0");
        }
        if !(self.gamma_dec > 0.0 && self.gamma_dec < 1.0) {
            return bad("gamma_dec must lie in (0,1)");
        }
        if !(self.gamma_inc > 1.0) {
            return bad("gamma_inc must exceed 1");
        }
        if !(self.eps_c > 0.0) || !(self.mu > 0.0) {
            return bad("eps_c and mu must be positive");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0,1)");
        }
        if !(self.lambda > 1.0) {
            return bad("lambda must exceed 1");
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return bad("c1 must lie in (0,1)");
        }
        if !(self.delta_min >= 0.0) {
            return bad("delta_min must be nonnegative");
        }
        let p = self.points.unwrap_or_else(|| self.model_kind.default_points(n));
        self.model_kind.check_points(n, p)?;
        if self.budget < p {
            return bad(&format!("budget {} is below the {p} evaluations needed for the first model", self.budget));
        }
        Ok(p)
    }

    fn search(&self) -> LagrangeSearch {
        LagrangeSearch { random_starts: self.random_starts, seed: self.seed, ..LagrangeSearch::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Criticality,
    Successful,
    ModelImproving,
    Unsuccessful,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Criticality => "criticality",
            StepKind::Successful => "successful",
            StepKind::ModelImproving => "model-improving",
            StepKind::Unsuccessful => "unsuccessful",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [StepKind::Criticality, StepKind::Successful, StepKind::ModelImproving, StepKind::Unsuccessful]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown step kind '{s}'")))
    }
}

/// One iteration: the state at its start, what was done, and the
/// evaluation count at its end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub delta: f64,
    pub pi_m: f64,
    pub rho: Option<f64>,
    pub step_kind: StepKind,
    pub evals: usize,
    pub fully_linear: bool,
    /// Spectral norm of the model Hessian at the start of the iteration.
    /// Not part of the CSV output.
    #[serde(default)]
    pub hessian_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Running,
    BudgetExhausted,
    RadiusBelowMinimum,
    IterationLimit,
    Failed,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Running => "running",
            Termination::BudgetExhausted => "budget-exhausted",
            Termination::RadiusBelowMinimum => "radius-below-minimum",
            Termination::IterationLimit => "iteration-limit",
            Termination::Failed => "failed",
        })
    }
}

pub const RUN_RECORD_HEADER: &str = "k,f,delta,pi_m,rho,step_kind,evals,fully_linear";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<IterationRecord>,
    pub status: Termination,
    pub notes: Vec<String>,
}

impl RunRecord {
    fn new() -> Self {
        RunRecord { rows: Vec::new(), status: Termination::Running, notes: Vec::new() }
    }

    /// CSV with header [`RUN_RECORD_HEADER`]; `rho` is empty when no ratio was formed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RUN_RECORD_HEADER);
        out.push('\n');
        for r in &self.rows {
            let rho = r.rho.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k, r.f, r.delta, r.pi_m, rho, r.step_kind, r.evals, r.fully_linear
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub record: RunRecord,
    /// Final sample set, carrying its function values.
    pub set: InterpolationSet,
    pub model: QuadraticModel,
    pub evals: usize,
}

#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub error: Error,
    pub record: RunRecord,
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.record.rows.len())
    }
}

impl std::error::Error for SolveFailure {}

/// Counts oracle calls and enforces the budget.
struct Evaluator<'f> {
    f: &'f mut dyn FnMut(&DVector<f64>) -> f64,
    evals: usize,
    budget: usize,
}

impl Evaluator<'_> {
    fn remaining(&self) -> usize {
        self.budget - self.evals
    }

    fn eval(&mut self, y: &DVector<f64>) -> Result<f64> {
        debug_assert!(self.evals < self.budget);
        self.evals += 1;
        let v = (self.f)(y);
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { x: to_vec(y) });
        }
        Ok(v)
    }
}

/// The current sample set with its values, factorization and model, plus
/// a cached poisedness certificate.
#[derive(Debug, Clone)]
pub struct ModelState<'r> {
    kind: ModelKind,
    region: &'r ConvexRegion,
    lambda: f64,
    search: LagrangeSearch,
    set: InterpolationSet,
    values: Vec<f64>,
    basis: Basis,
    model: QuadraticModel,
    version: u64,
    cert: Option<(u64, PoisednessCertificate)>,
}

impl<'r> ModelState<'r> {
    /// `set` must carry values for all its points.
    pub fn new(
        kind: ModelKind,
        region: &'r ConvexRegion,
        set: InterpolationSet,
        lambda: f64,
        search: LagrangeSearch,
    ) -> Result<Self> {
        let values = set
            .values()
            .ok_or_else(|| Error::InvalidArgument("sample set has no function values".into()))?
            .to_vec();
        let set = set.without_values();
        let basis = Basis::build(kind, &set)?;
        let model = basis.fit(&values)?;
        Ok(ModelState { kind, region, lambda, search, set, values, basis, model, version: 0, cert: None })
    }

    pub fn set(&self) -> &InterpolationSet {
        &self.set
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn model(&self) -> &QuadraticModel {
        &self.model
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn base(&self) -> &DVector<f64> {
        self.set.base()
    }

    pub fn radius(&self) -> f64 {
        self.set.radius()
    }

    fn install(&mut self, set: InterpolationSet, values: Vec<f64>) -> Result<()> {
        let basis = Basis::build(self.kind, &set)?;
        self.model = basis.fit(&values)?;
        self.basis = basis;
        self.set = set;
        self.values = values;
        self.version += 1;
        Ok(())
    }

    /// Poisedness certificate for the current set, base and radius, cached
    /// until any of them changes.
    pub fn certify(&mut self) -> Result<&PoisednessCertificate> {
        let fresh = matches!(&self.cert, Some((v, _)) if *v == self.version);
        if !fresh {
            let c = check_basis_poisedness(&self.basis, self.region, self.lambda, 1.0, &self.search)?;
            self.cert = Some((self.version, c));
        }
        Ok(&self.cert.as_ref().expect("just filled").1)
    }

    pub fn is_fully_linear(&mut self) -> Result<bool> {
        Ok(self.certify()?.verified)
    }

    /// Move the base and radius, keeping the samples.
    pub fn recenter(&mut self, x: DVector<f64>, delta: f64) -> Result<()> {
        let set = self.set.recentered(x, delta)?;
        let values = self.values.clone();
        self.install(set, values)
    }

    /// Put an evaluated point into the set, replacing the sample farthest
    /// from the base, or failing that the one whose Lagrange polynomial is
    /// largest at `y`. Returns false if neither keeps the geometry
    /// nonsingular.
    pub fn insert_point(&mut self, y: &DVector<f64>, fy: f64) -> Result<bool> {
        if self.set.points().iter().any(|p| p == y) {
            return Ok(false);
        }
        let x = self.base().clone();
        let far = (0..self.set.len())
            .max_by(|&a, &b| (self.set.point(a) - &x).norm().total_cmp(&(self.set.point(b) - &x).norm()))
            .expect("nonempty set");
        let ell = self.basis.lagrange_values(y)?;
        let by_lagrange = ell.iamax();
        for t in [far, by_lagrange] {
            let mut set = self.set.clone();
            set.replace(t, y.clone(), None)?;
            let mut values = self.values.clone();
            values[t] = fy;
            match self.install(set, values) {
                Ok(()) => return Ok(true),
                Err(Error::SingularGeometry(_) | Error::DegenerateGeometry { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(false)
    }

    /// Repair the set to a certified Λ-poised one in `B(x, min(Δ,1)) ∩ C`,
    /// evaluating only new points. Returns false when the budget cannot
    /// cover the new evaluations.
    fn make_fully_linear(&mut self, ev: &mut Evaluator<'_>) -> Result<bool> {
        let p = self.set.len();
        let mut work = self.set.clone();
        let salvaged = replace_distant_points(self.kind, &mut work, self.region, &self.search)?;
        let start = salvaged.map(|_| work);
        let outcome = improve_to_poised(
            self.kind,
            start.as_ref(),
            self.region,
            self.base(),
            self.radius(),
            p,
            self.lambda,
            &self.search,
        )?;
        let known = |y: &DVector<f64>| self.set.points().iter().position(|q| q == y).map(|i| self.values[i]);
        let needed = outcome.set.points().iter().filter(|y| known(y).is_none()).count();
        if needed > ev.remaining() {
            return Ok(false);
        }
        let mut values = Vec::with_capacity(p);
        for y in outcome.set.points() {
            values.push(match known(y) {
                Some(v) => v,
                None => ev.eval(y)?,
            });
        }
        self.install(outcome.set, values)?;
        self.cert = Some((self.version, outcome.certificate));
        Ok(true)
    }
}

struct Run<'r> {
    state: ModelState<'r>,
    x: DVector<f64>,
    fx: f64,
    delta: f64,
}

/// Minimize `f` over `region` from `x0`.
///
/// `x0` is projected onto the region first if it is infeasible. On a hard
/// failure the partial record is returned with the error.
pub fn solve(
    f: &mut dyn FnMut(&DVector<f64>) -> f64,
    region: &ConvexRegion,
    x0: &DVector<f64>,
    config: &SolverConfig,
) -> std::result::Result<SolveOutcome, SolveFailure> {
    let mut record = RunRecord::new();
    match solve_inner(f, region, x0, config, &mut record) {
        Ok(out) => Ok(SolveOutcome { record, ..out }),
        Err(error) => {
            record.status = Termination::Failed;
            Err(SolveFailure { error, record })
        }
    }
}

fn solve_inner(
    f: &mut dyn FnMut(&DVector<f64>) -> f64,
    region: &ConvexRegion,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
    record: &mut RunRecord,
) -> Result<SolveOutcome> {
    let n = x0.len();
    if region.dim() != n {
        return Err(Error::DimensionMismatch { expected: region.dim(), got: n });
    }
    let p = cfg.validate(n)?;
    let search = cfg.search();
    let mut x = x0.clone();
    if !region.is_feasible(&x) {
        x = region.project(&x)?.point;
        record.notes.push(format!("starting point projected onto the region: {:?}", to_vec(&x)));
    }
    let mut ev = Evaluator { f, evals: 0, budget: cfg.budget };

    let init = improve_to_poised(cfg.model_kind, None, region, &x, cfg.delta0, p, cfg.lambda, &search)?;
    let mut values = Vec::with_capacity(p);
    for y in init.set.points() {
        values.push(ev.eval(y)?);
    }
    let fx = match init.set.points().iter().position(|y| *y == x) {
        Some(i) => values[i],
        None if ev.remaining() > 0 => ev.eval(&x)?,
        None => return Err(Error::InvalidArgument("budget too small to evaluate the starting point".into())),
    };
    let set = init.set.clone().with_values(values)?;
    let mut state = ModelState::new(cfg.model_kind, region, set, cfg.lambda, search)?;
    state.cert = Some((state.version, init.certificate));
    let mut run = Run { state, x, fx, delta: cfg.delta0 };

    let mut k = 0;
    record.status = loop {
        if run.delta < cfg.delta_min {
            break Termination::RadiusBelowMinimum;
        }
        if k >= cfg.max_iterations {
            break Termination::IterationLimit;
        }
        match iterate(&mut run, &mut ev, cfg, k)? {
            Some(row) => record.rows.push(row),
            None => break Termination::BudgetExhausted,
        }
        k += 1;
    };

    let set = run.state.set().clone().with_values(run.state.values().to_vec())?;
    Ok(SolveOutcome {
        x: run.x,
        f: run.fx,
        record: RunRecord::new(),
        model: run.state.model().clone(),
        set,
        evals: ev.evals,
    })
}

/// One pass of the main loop. `None` means the budget ran out before the
/// iteration could complete; the state is left unchanged in that case.
fn iterate(run: &mut Run<'_>, ev: &mut Evaluator<'_>, cfg: &SolverConfig, k: usize) -> Result<Option<IterationRecord>> {
    let region = run.state.region;
    let g = run.state.model().g().clone();
    let pi = criticality_measure(&g, &run.x, region, 1.0)?.value;
    let delta = run.delta;
    let mut row = IterationRecord {
        k,
        f: run.fx,
        delta,
        pi_m: pi,
        rho: None,
        step_kind: StepKind::Criticality,
        evals: ev.evals,
        fully_linear: false,
        hessian_norm: run.state.model().hessian_norm(),
    };
    let certified = run.state.is_fully_linear()?;
    row.fully_linear = certified;

    if pi < cfg.eps_c && (pi < delta / cfg.mu || !certified) {
        let new_delta = if certified { cfg.gamma_dec * delta } else { delta };
        let saved = run.state.clone();
        run.state.recenter(run.x.clone(), new_delta)?;
        if !run.state.make_fully_linear(ev)? {
            run.state = saved;
            return Ok(None);
        }
        run.delta = new_delta;
        row.evals = ev.evals;
        return Ok(Some(row));
    }

    let step = solve_trust_region_step(run.state.model(), &run.x, region, delta, cfg.c1)?;
    if !step.satisfied_cauchy {
        log::debug!("iteration {k}: step misses the Cauchy decrease target {:e}", step.cauchy_target);
    }
    let mut trial = None;
    if step.predicted_reduction > 0.0 {
        if ev.remaining() == 0 {
            return Ok(None);
        }
        let y = &run.x + &step.step;
        let fy = ev.eval(&y)?;
        row.rho = Some((run.fx - fy) / step.predicted_reduction);
        trial = Some((y, fy));
    }
    let rho = row.rho.unwrap_or(f64::NEG_INFINITY);

    if rho >= cfg.eta {
        let (y, fy) = trial.expect("a ratio implies a trial point");
        row.step_kind = StepKind::Successful;
        run.delta = (cfg.gamma_inc * delta).min(cfg.delta_max);
        run.x = y.clone();
        run.fx = fy;
        run.state.recenter(y.clone(), run.delta)?;
        run.state.insert_point(&y, fy)?;
    } else if !certified {
        row.step_kind = StepKind::ModelImproving;
        if let Some((y, fy)) = &trial {
            run.state.insert_point(y, *fy)?;
        }
        let saved = run.state.clone();
        if !run.state.make_fully_linear(ev)? {
            run.state = saved;
            row.evals = ev.evals;
            // The trial evaluation was spent; record it before stopping.
            return Ok(if trial.is_some() { Some(row) } else { None });
        }
    } else {
        row.step_kind = StepKind::Unsuccessful;
        run.delta = cfg.gamma_dec * delta;
        run.state.recenter(run.x.clone(), run.delta)?;
        if let Some((y, fy)) = &trial {
            run.state.insert_point(y, *fy)?;
        }
    }
    row.evals = ev.evals;
    Ok(Some(row))
}
