//! `cdfo poisedness check|improve` on a sample-set file.

use std::path::{Path, PathBuf};

use cdfo::poisedness::{check_poisedness, improve_to_poised, LagrangeSearch, PoisednessCertificate, SwapRecord};
use cdfo::{parse_region, Error, InterpolationSet, ModelKind};
use serde::Serialize;

use crate::config::write_file;
use crate::error::{config, io, CliError};

pub struct PoisedArgs {
    pub set: PathBuf,
    pub region: String,
    pub lambda: f64,
    pub kind: ModelKind,
    pub beta: f64,
    pub points: Option<usize>,
    pub seed: u64,
    pub random_starts: usize,
}

impl PoisedArgs {
    fn search(&self) -> LagrangeSearch {
        LagrangeSearch { seed: self.seed, random_starts: self.random_starts, ..LagrangeSearch::default() }
    }
}

fn load_set(path: &Path) -> Result<InterpolationSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    InterpolationSet::from_json(&text).map_err(|e| io(path, e))
}

fn print_certificate(c: &PoisednessCertificate) {
    println!("verified: {}", c.verified);
    println!("lambda_target: {}", c.lambda_target);
    println!("lambda_observed: {:.6e}", c.lambda_observed);
    println!("geometry_ok: {}", c.geometry_ok);
    match (c.witness_index, &c.witness_point) {
        (Some(t), Some(y)) => println!("witness: index {t} at {y:?}"),
        _ => println!("witness: none"),
    }
    if let Some(r) = &c.reason {
        println!("reason: {r}");
    }
}

pub fn check(a: &PoisedArgs) -> Result<u8, CliError> {
    let set = load_set(&a.set)?;
    let region = parse_region(&a.region).map_err(config)?;
    let cert = check_poisedness(a.kind, &set, &region, a.lambda, a.beta, &a.search()).map_err(config)?;
    print_certificate(&cert);
    Ok(if cert.verified { 0 } else { 1 })
}

#[derive(Serialize)]
struct SwapLog<'a> {
    initial_replacements: Option<usize>,
    swaps: &'a [SwapRecord],
    certificate: Option<&'a PoisednessCertificate>,
    error: Option<String>,
}

/// `improved.json` logs to `improved.swaps.json`.
pub fn swap_log_path(out: &Path) -> PathBuf {
    out.with_extension("swaps.json")
}

pub fn improve(a: &PoisedArgs, out: &Path) -> Result<u8, CliError> {
    let set = load_set(&a.set)?;
    let region = parse_region(&a.region).map_err(config)?;
    let p = a.points.unwrap_or(set.len());
    let log_path = swap_log_path(out);
    let write_log = |log: &SwapLog| -> Result<(), CliError> {
        write_file(&log_path, &serde_json::to_string_pretty(log).map_err(config)?)
    };
    match improve_to_poised(a.kind, Some(&set), &region, set.base(), set.radius(), p, a.lambda, &a.search()) {
        Ok(res) => {
            write_file(out, &res.set.to_json().map_err(config)?)?;
            write_log(&SwapLog {
                initial_replacements: res.initial_replacements,
                swaps: &res.swaps,
                certificate: Some(&res.certificate),
                error: None,
            })?;
            if let Some(k) = res.initial_replacements {
                println!("rebuilt the set ({k} replacements)");
            }
            println!("swaps: {}", res.swaps.len());
            print_certificate(&res.certificate);
            println!("wrote {} and {}", out.display(), log_path.display());
            Ok(if res.certificate.verified { 0 } else { 1 })
        }
        Err(Error::SwapCapExceeded { cap, swaps }) => {
            let msg = format!("no certificate after {cap} swaps");
            write_log(&SwapLog { initial_replacements: None, swaps: &swaps, certificate: None, error: Some(msg.clone()) })?;
            eprintln!("{msg}; swap log in {}", log_path.display());
            Ok(1)
        }
        Err(e) => Err(config(e)),
    }
}
