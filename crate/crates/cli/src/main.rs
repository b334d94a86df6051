//! `openadmm`: run scenarios, validate configs, cross-check the reference
//! oracles and evaluate tracking bounds.
//!
//! Exit codes: 0 success, 1 oracle check failed, 2 invalid input, 3 runtime
//! failure. Logs go to stderr, results to stdout.

mod oracle_check;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use openadmm::analysis::BoundInputs;
use openadmm::config::{Scale, ScenarioConfig};
use openadmm::experiments::{builtin_scenario, run_and_summarize, scenario_description, Execution, SCENARIO_IDS};
use openadmm::Error;

#[derive(Parser)]
#[command(name = "openadmm", version, about = "Simulator for ADMM over networks with arriving and departing agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a config file and write trace CSVs.
    Run(RunArgs),
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the built-in scenario ids.
    ListScenarios,
    /// Compare the per-agent engine against the dense reference form.
    OracleCheck(oracle_check::OracleArgs),
    /// Evaluate the contraction factor, radius and consensus bound.
    Bound(BoundArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scale of a built-in scenario.
    #[arg(long, default_value_t = Scale::Desk)]
    scale: Scale,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "OPENADMM_OUT_DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    /// Run repetitions one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    omega: f64,
    #[arg(long)]
    n: usize,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn from_error(e: Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn resolve(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let mut config = match (&args.scenario, &args.config) {
        (Some(id), _) => builtin_scenario(id, args.scale),
        (None, Some(path)) => ScenarioConfig::load(path),
        (None, None) => unreachable!("clap requires one source"),
    }
    .map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    if let Some(reps) = args.reps {
        config.scenario.reps = reps;
    }
    config.validate().map_err(|e| Failure::Invalid(e.to_string()))?;
    Ok(config)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let config = resolve(&args)?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    eprintln!(
        "running {} ({}, n0 {}, horizon {}, {} reps)",
        config.scenario.id, config.scenario.scale, config.graph.n0, config.scenario.horizon, config.scenario.reps
    );
    let report = run_and_summarize(&config, Some(&args.out), exec).map_err(Failure::from_error)?;
    eprintln!("wrote {} traces to {}", report.traces.len(), args.out.display());
    println!("variant,reps,eps_mean,d_cons_mean,d_tsi_mean,final_d_cons");
    for v in &report.variants {
        let eps = v.eps.map_or(String::new(), |s| format!("{:e}", s.mean));
        println!("{},{},{eps},{:e},{:e},{:e}", v.label, v.reps, v.d_cons.mean, v.d_tsi.mean, v.final_d_cons);
    }
    if let Some(path) = report.summary_path {
        eprintln!("summary: {}", path.display());
    }
    Ok(())
}

fn bound(args: BoundArgs) -> Result<(), Failure> {
    let inputs = BoundInputs::from_rates(args.gamma, args.beta, args.rho, args.sigma, args.omega)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    println!("theta={}", inputs.theta());
    println!("R={}", inputs.radius());
    println!("delta={}", inputs.consensus_bound(args.n));
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate { config } => ScenarioConfig::load(&config)
            .map(|c| println!("ok {}", c.scenario.id))
            .map_err(|e| Failure::Invalid(e.to_string())),
        Command::ListScenarios => {
            for id in SCENARIO_IDS {
                println!("{id}\t{}", scenario_description(id).unwrap_or(""));
            }
            Ok(())
        }
        Command::OracleCheck(args) => match oracle_check::run(&args) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(Failure::from_error(e)),
        },
        Command::Bound(args) => bound(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
