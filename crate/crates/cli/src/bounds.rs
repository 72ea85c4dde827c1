//! `cdfo bounds`: sampled fully-linear error checks on random poised sets.

use std::path::PathBuf;

use cdfo::bounds::{check_fully_linear_bounds, BoundCheck};
use cdfo::poisedness::{check_poisedness, improve_to_poised, LagrangeSearch};
use cdfo::{Basis, InterpolationSet};
use clap::ValueEnum;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{create_dir, Settings};
use crate::error::{config, io, CliError};
use crate::registry;
use crate::solve::resolve_region;

/// Which Λ enters the error constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LambdaMode {
    /// The certified target Λ.
    Target,
    /// The largest Lagrange value the search finds on the final set.
    Observed,
}

pub struct BoundsArgs {
    pub sets: usize,
    pub samples: usize,
    pub l_scale: f64,
    pub lambda_mode: LambdaMode,
    pub contract: f64,
}

#[derive(Debug, Serialize)]
pub struct BoundsRow {
    pub set: usize,
    pub problem: String,
    pub model: String,
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub lambda: f64,
    pub beta: f64,
    pub lipschitz: f64,
    pub kappa_ef: f64,
    pub kappa_eg: f64,
    pub kappa_h: Option<f64>,
    pub max_value_error: f64,
    pub max_gradient_error: f64,
    pub max_hessian_term: Option<f64>,
    pub ratio_value: f64,
    pub ratio_gradient: f64,
    pub ratio_hessian: Option<f64>,
    pub violated: bool,
}

fn contracted(set: &InterpolationSet, factor: f64) -> Result<InterpolationSet, CliError> {
    let x = set.base();
    let pts = set.points().iter().map(|y| x + (y - x) * factor).collect();
    InterpolationSet::new(x.clone(), set.radius(), pts).map_err(config)
}

pub fn rows(s: &Settings, a: &BoundsArgs) -> Result<Vec<BoundsRow>, CliError> {
    let name = s.problem.as_deref().ok_or_else(|| config("no problem given (use --problem)"))?;
    let problem = registry::lookup(name)?;
    let region = resolve_region(s.region.as_deref(), &problem)?;
    if s.region.is_some() {
        eprintln!("warning: the Lipschitz constant of {name} is only known on {}", problem.region);
    }
    if !(a.contract > 0.0 && a.contract <= 1.0) {
        return Err(config("--contract must lie in (0, 1]"));
    }
    if a.contract < 1.0 && a.lambda_mode == LambdaMode::Target {
        return Err(config("a contracted set is no longer certified; use --lambda-mode observed"));
    }
    let kind = s.model_kind()?;
    let n = problem.dim();
    let p = s.points.unwrap_or_else(|| kind.default_points(n));
    kind.check_points(n, p).map_err(config)?;
    let lambda = s.lambda.unwrap_or(10.0);
    if !(lambda > 1.0) {
        return Err(config("lambda must exceed 1"));
    }
    let f = &problem.objective;
    let lipschitz = a.l_scale * f.gradient_lipschitz();
    let seed = s.seed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = region.project(&problem.x0).map_err(config)?.point;
    let mut out = Vec::with_capacity(a.sets);
    for i in 0..a.sets {
        let x: DVector<f64> = region.sample_in_ball(&center, 1.0, &mut rng, 100).map_err(config)?;
        let delta = rng.random_range(0.05..1.0);
        let opts = LagrangeSearch { seed: seed.wrapping_add(i as u64), ..LagrangeSearch::default() };
        let fail = |e: cdfo::Error| CliError::Solver(format!("set {i}: {e}"));
        let improved = improve_to_poised(kind, None, &region, &x, delta, p, lambda, &opts).map_err(fail)?;
        if !improved.certificate.verified {
            return Err(CliError::Solver(format!("set {i}: no poisedness certificate")));
        }
        let set = if a.contract < 1.0 { contracted(&improved.set, a.contract)? } else { improved.set };
        let lam = match a.lambda_mode {
            LambdaMode::Target => lambda,
            LambdaMode::Observed => check_poisedness(kind, &set, &region, 1e12, 1.0, &opts).map_err(fail)?.lambda_observed,
        };
        let values: Vec<f64> = set.points().iter().map(|y| f.value(y)).collect();
        let model = Basis::build(kind, &set).and_then(|b| b.fit(&values)).map_err(fail)?;
        let check = BoundCheck { kind, lipschitz, lambda: lam, beta: set.beta(), samples: a.samples, seed: seed.wrapping_add(i as u64) };
        let r = check_fully_linear_bounds(&set, &model, f.as_ref(), &region, &check).map_err(fail)?;
        out.push(BoundsRow {
            set: i,
            problem: problem.name.to_string(),
            model: kind.to_string(),
            n,
            p,
            delta,
            lambda: lam,
            beta: r.beta,
            lipschitz,
            kappa_ef: r.constants.kappa_ef,
            kappa_eg: r.constants.kappa_eg,
            kappa_h: r.constants.kappa_h,
            max_value_error: r.max_value_error,
            max_gradient_error: r.max_gradient_error,
            max_hessian_term: r.max_hessian_term,
            ratio_value: r.ratio_value,
            ratio_gradient: r.ratio_gradient,
            ratio_hessian: r.ratio_hessian,
            violated: r.violated(),
        });
    }
    Ok(out)
}

pub fn write_csv(path: &PathBuf, rows: &[BoundsRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn run(s: &Settings, a: &BoundsArgs) -> Result<u8, CliError> {
    let rows = rows(s, a)?;
    let dir = s.out_dir();
    create_dir(&dir)?;
    let path = dir.join("bounds.csv");
    write_csv(&path, &rows)?;
    let worst = rows.iter().map(|r| r.ratio_value.max(r.ratio_gradient).max(r.ratio_hessian.unwrap_or(0.0))).fold(0.0, f64::max);
    let violations = rows.iter().filter(|r| r.violated).count();
    println!("sets={} max_ratio={worst:.4e} violations={violations}", rows.len());
    println!("wrote {}", path.display());
    Ok(if violations > 0 { 1 } else { 0 })
}
