//! Command-line front end for the cdfo solver.
//!
//! Exit codes: 0 success, 1 check failed (not poised, bound violated),
//! 2 configuration or i/o error, 3 solver failure.

mod bench;
mod bounds;
mod config;
mod error;
mod poised;
mod registry;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{BoundsArgs, LambdaMode};
use crate::config::{parse_model, Settings};
use crate::error::CliError;
use crate::poised::PoisedArgs;

#[derive(Parser)]
#[command(name = "cdfo", version, about = "Derivative-free trust-region optimization over convex sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver on a registry problem.
    Solve(RunFlags),
    /// Check or repair the geometry of a sample set.
    #[command(subcommand)]
    Poisedness(PoisedCommand),
    /// Compare model errors with the fully-linear bounds on random poised sets.
    Bounds(BoundsFlags),
    /// Run every (problem, model, seed) cell and tabulate the results.
    Bench(BenchFlags),
    /// List the registry problems.
    Problems,
}

/// Flags shared by `solve`, `bounds` and `bench`; each overrides the
/// matching key of `--config`.
#[derive(Args, Clone)]
struct RunFlags {
    /// TOML file of flat keys (see README).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Region spec, e.g. "box(-1, 1)^2" or "intersect(box(0, 1)^2, ball(1)^2)".
    #[arg(long)]
    region: Option<String>,
    /// Starting point as comma-separated numbers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// linreg or mfn.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $CDFO_OUT_DIR, else ./cdfo-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunFlags {
    fn settings(&self) -> Result<Settings, CliError> {
        let file = Settings::load(self.config.as_deref())?;
        let flags = Settings {
            problem: self.problem.clone(),
            region: self.region.clone(),
            x0: self.x0.clone(),
            model: self.model.clone(),
            points: self.points,
            lambda: self.lambda,
            max_evals: self.max_evals,
            seed: self.seed,
            out: self.out.clone(),
            ..Settings::default()
        };
        Ok(file.overlay(flags))
    }
}

#[derive(Args)]
struct BoundsFlags {
    #[command(flatten)]
    run: RunFlags,
    /// Number of random poised sets.
    #[arg(long, default_value_t = 50)]
    sets: usize,
    /// Feasible samples per set for the value check.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Multiply the known Lipschitz constant (values below 1 are a negative control).
    #[arg(long, default_value_t = 1.0)]
    l_scale: f64,
    #[arg(long, value_enum, default_value_t = LambdaMode::Target)]
    lambda_mode: LambdaMode,
    /// Pull every point toward the base by this factor after certification.
    #[arg(long, default_value_t = 1.0)]
    contract: f64,
}

#[derive(Args)]
struct BenchFlags {
    #[command(flatten)]
    run: RunFlags,
    /// Comma-separated problem names (default: the whole registry).
    #[arg(long, value_delimiter = ',')]
    problems: Option<Vec<String>>,
    /// Comma-separated model kinds (default: mfn,linreg).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Comma-separated seeds (default: --seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Write zero wall times so repeated reports are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct PoisedFlags {
    /// Sample-set JSON file.
    #[arg(long)]
    set: PathBuf,
    #[arg(long)]
    region: String,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    #[arg(long, default_value = "mfn")]
    model: String,
    /// Distance bound factor: points must lie within beta*min(radius, 1) of the base.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    random_starts: usize,
}

impl PoisedFlags {
    fn args(&self, points: Option<usize>) -> Result<PoisedArgs, CliError> {
        Ok(PoisedArgs {
            set: self.set.clone(),
            region: self.region.clone(),
            lambda: self.lambda,
            kind: parse_model(&self.model)?,
            beta: self.beta,
            points,
            seed: self.seed,
            random_starts: self.random_starts,
        })
    }
}

#[derive(Subcommand)]
enum PoisedCommand {
    /// Exit 0 when the set is certified, 1 when it is not.
    Check(PoisedFlags),
    /// Repair the set; writes it to --out and the swap log beside it.
    Improve {
        #[command(flatten)]
        flags: PoisedFlags,
        #[arg(long)]
        out: PathBuf,
        /// Point count of the repaired set (default: the input's).
        #[arg(long)]
        points: Option<usize>,
    },
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve(flags) => solve::run(&flags.settings()?),
        Command::Poisedness(PoisedCommand::Check(flags)) => poised::check(&flags.args(None)?),
        Command::Poisedness(PoisedCommand::Improve { flags, out, points }) => poised::improve(&flags.args(points)?, &out),
        Command::Bounds(b) => {
            let args = BoundsArgs {
                sets: b.sets,
                samples: b.samples,
                l_scale: b.l_scale,
                lambda_mode: b.lambda_mode,
                contract: b.contract,
            };
            bounds::run(&b.run.settings()?, &args)
        }
        Command::Bench(b) => {
            let lists = Settings { problems: b.problems, models: b.models, seeds: b.seeds, ..Settings::default() };
            bench::run(&b.run.settings()?.overlay(lists), !b.no_timing)
        }
        Command::Problems => {
            for name in registry::NAMES {
                let p = registry::lookup(name)?;
                println!("{:<14} n={} region={:<14} {}", p.name, p.dim(), p.region, p.description);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
