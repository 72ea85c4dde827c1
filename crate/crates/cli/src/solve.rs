//! `cdfo solve`: one run of the trust-region method on a registry problem.

use std::path::Path;

use cdfo::subproblems::criticality_measure;
use cdfo::{parse_region, solve, ConvexRegion, ModelKind, SolverConfig};
use nalgebra::DVector;

use crate::config::{create_dir, write_file, Settings};
use crate::error::{config, CliError};
use crate::registry::{self, ProblemSpec};

/// A fully resolved run: problem, region, start and solver parameters.
pub struct RunPlan {
    pub problem: ProblemSpec,
    pub region: ConvexRegion,
    pub x0: DVector<f64>,
    pub kind: ModelKind,
    pub solver: SolverConfig,
    pub points: usize,
    /// The region differs from the registered one, so `reference` may not apply.
    pub custom_region: bool,
}

impl RunPlan {
    pub fn resolve(s: &Settings, problem: &str, kind: ModelKind) -> Result<RunPlan, CliError> {
        let problem = registry::lookup(problem)?;
        let n = problem.dim();
        let region = resolve_region(s.region.as_deref(), &problem)?;
        let x0 = match &s.x0 {
            Some(v) if v.len() != n => return Err(config(format!("x0 has {} entries, problem needs {n}", v.len()))),
            Some(v) => DVector::from_column_slice(v),
            None => problem.x0.clone(),
        };
        let solver = s.solver_config(kind);
        let points = solver.validate(n).map_err(config)?;
        Ok(RunPlan { custom_region: s.region.is_some(), problem, region, x0, kind, solver, points })
    }
}

pub fn resolve_region(spec: Option<&str>, problem: &ProblemSpec) -> Result<ConvexRegion, CliError> {
    let region = parse_region(spec.unwrap_or(problem.region)).map_err(config)?;
    if region.dim() != problem.dim() {
        return Err(config(format!(
            "region has dimension {}, problem {} has dimension {}",
            region.dim(),
            problem.name,
            problem.dim()
        )));
    }
    Ok(region)
}

/// Result of a run, successful or not, for reporting.
pub struct RunSummary {
    pub x: DVector<f64>,
    pub f: f64,
    pub pi_f: f64,
    pub evals: usize,
    pub iterations: usize,
    pub status: String,
    pub failure: Option<String>,
}

pub struct RunFiles {
    pub csv: String,
    pub model: Option<String>,
    pub set: Option<String>,
}

/// Run the solver. The true gradient is used only for `pi_f`.
pub fn execute(plan: &RunPlan) -> Result<(RunSummary, RunFiles), CliError> {
    let f = &plan.problem.objective;
    let mut obj = |y: &DVector<f64>| f.value(y);
    let true_pi = |x: &DVector<f64>| -> Result<f64, CliError> {
        criticality_measure(&f.gradient(x), x, &plan.region, 1.0).map(|r| r.value).map_err(|e| CliError::Solver(e.to_string()))
    };
    match solve(&mut obj, &plan.region, &plan.x0, &plan.solver) {
        Ok(out) => {
            let summary = RunSummary {
                pi_f: true_pi(&out.x)?,
                f: out.f,
                evals: out.evals,
                iterations: out.record.rows.len(),
                status: out.record.status.to_string(),
                x: out.x,
                failure: None,
            };
            let files = RunFiles {
                csv: out.record.to_csv(),
                model: Some(out.model.to_json().map_err(|e| CliError::Solver(e.to_string()))?),
                set: Some(out.set.to_json().map_err(|e| CliError::Solver(e.to_string()))?),
            };
            Ok((summary, files))
        }
        Err(fail) => {
            let last = fail.record.rows.last();
            let summary = RunSummary {
                x: plan.x0.clone(),
                f: last.map_or(f64::NAN, |r| r.f),
                pi_f: f64::NAN,
                evals: last.map_or(0, |r| r.evals),
                iterations: fail.record.rows.len(),
                status: fail.record.status.to_string(),
                failure: Some(fail.to_string()),
            };
            Ok((summary, RunFiles { csv: fail.record.to_csv(), model: None, set: None }))
        }
    }
}

pub fn format_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn run(s: &Settings) -> Result<u8, CliError> {
    let problem = s.problem.as_deref().ok_or_else(|| config("no problem given (use --problem or the config key)"))?;
    let plan = RunPlan::resolve(s, problem, s.model_kind()?)?;
    let dir = s.out_dir();
    create_dir(&dir)?;
    let (summary, files) = execute(&plan)?;
    write_file(&dir.join("runrecord.csv"), &files.csv)?;
    if let (Some(model), Some(set)) = (&files.model, &files.set) {
        write_file(&dir.join("final_model.json"), model)?;
        write_file(&dir.join("final_set.json"), set)?;
    }
    if let Some(msg) = summary.failure {
        return Err(CliError::Solver(format!("{msg}; partial record in {}", dir.join("runrecord.csv").display())));
    }
    print_summary(&plan, &summary, &dir);
    Ok(0)
}

fn print_summary(plan: &RunPlan, s: &RunSummary, dir: &Path) {
    let mut line = format!(
        "{} {} p={}: status={} f={:.10e} pi_f={:.3e} evals={} iterations={} x={}",
        plan.problem.name,
        plan.kind,
        plan.points,
        s.status,
        s.f,
        s.pi_f,
        s.evals,
        s.iterations,
        format_vec(&s.x)
    );
    if let (Some(r), false) = (&plan.problem.reference, plan.custom_region) {
        line.push_str(&format!(" dist_to_reference={:.3e}", (&s.x - r).norm()));
    }
    println!("{line}");
    println!("wrote {}", dir.display());
}
