//! `cdfo bench`: every (problem, model, seed) cell, one run each.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::{create_dir, parse_model, Settings};
use crate::error::{io, CliError};
use crate::registry::NAMES;
use crate::solve::{execute, RunPlan};

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub problem: String,
    pub model: String,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub status: String,
    pub final_f: f64,
    pub pi_f: f64,
    pub evals: usize,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchSummaryRow {
    pub problem: String,
    pub model: String,
    pub runs: usize,
    pub failures: usize,
    pub best_final_f: f64,
    pub mean_final_f: f64,
    pub max_pi_f: f64,
    pub mean_evals: f64,
    pub total_wall_ms: f64,
}

/// Runs cells in order; `timing = false` writes zero wall times so the
/// report is byte-identical across repeated runs.
pub fn rows(s: &Settings, timing: bool) -> Result<Vec<BenchRow>, CliError> {
    let problems: Vec<String> = match (&s.problems, &s.problem) {
        (Some(list), _) => list.clone(),
        (None, Some(one)) => vec![one.clone()],
        (None, None) => NAMES.iter().map(|n| n.to_string()).collect(),
    };
    let models = match (&s.models, &s.model) {
        (Some(list), _) => list.iter().map(|m| parse_model(m)).collect::<Result<Vec<_>, _>>()?,
        (None, Some(one)) => vec![parse_model(one)?],
        (None, None) => vec![cdfo::ModelKind::MfnQuadratic, cdfo::ModelKind::LinearRegression],
    };
    let seeds = s.seeds.clone().unwrap_or_else(|| vec![s.seed()]);
    // Resolve every cell before running any, so config errors surface first.
    let mut plans = Vec::new();
    for name in &problems {
        for &kind in &models {
            for &seed in &seeds {
                let cell = Settings { seed: Some(seed), ..s.clone() };
                plans.push((seed, RunPlan::resolve(&cell, name, kind)?));
            }
        }
    }
    let mut out = Vec::with_capacity(plans.len());
    for (seed, plan) in &plans {
        let start = Instant::now();
        let (sum, _) = execute(plan)?;
        let wall_ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        out.push(BenchRow {
            problem: plan.problem.name.to_string(),
            model: plan.kind.to_string(),
            seed: *seed,
            n: plan.problem.dim(),
            p: plan.points,
            status: sum.status,
            final_f: sum.f,
            pi_f: sum.pi_f,
            evals: sum.evals,
            iterations: sum.iterations,
            wall_ms,
        });
    }
    Ok(out)
}

pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.problem.clone(), r.model.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(problem, model)| {
            let cell: Vec<&BenchRow> = rows.iter().filter(|r| r.problem == problem && r.model == model).collect();
            let ok: Vec<&&BenchRow> = cell.iter().filter(|r| r.status != "failed").collect();
            let m = ok.len().max(1) as f64;
            BenchSummaryRow {
                runs: cell.len(),
                failures: cell.len() - ok.len(),
                best_final_f: ok.iter().map(|r| r.final_f).fold(f64::INFINITY, f64::min),
                mean_final_f: ok.iter().map(|r| r.final_f).sum::<f64>() / m,
                max_pi_f: ok.iter().map(|r| r.pi_f).fold(0.0, f64::max),
                mean_evals: ok.iter().map(|r| r.evals as f64).sum::<f64>() / m,
                total_wall_ms: cell.iter().map(|r| r.wall_ms).sum(),
                problem,
                model,
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn run(s: &Settings, timing: bool) -> Result<u8, CliError> {
    let rows = rows(s, timing)?;
    let summary = summarize(&rows);
    let dir = s.out_dir();
    create_dir(&dir)?;
    write_csv(&dir.join("bench.csv"), &rows)?;
    write_csv(&dir.join("bench_summary.csv"), &summary)?;
    println!("{:<14} {:<7} {:>4} {:>5} {:>16} {:>10} {:>10} {:>12}", "problem", "model", "runs", "fail", "best f", "max pi_f", "mean evals", "wall ms");
    for r in &summary {
        println!(
            "{:<14} {:<7} {:>4} {:>5} {:>16.9e} {:>10.2e} {:>10.1} {:>12.1}",
            r.problem, r.model, r.runs, r.failures, r.best_final_f, r.max_pi_f, r.mean_evals, r.total_wall_ms
        );
    }
    println!("wrote {}", dir.display());
    let failures: usize = summary.iter().map(|r| r.failures).sum();
    if failures > 0 {
        return Err(CliError::Solver(format!("{failures} run(s) failed; see bench.csv")));
    }
    Ok(0)
}
