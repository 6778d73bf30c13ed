//! Command-line driver: runs configured experiments and the acceptance
//! checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eplab::harness::{Acceptance, Experiment, RunConfig, Tolerances};
use eplab::{par, Error};

const EXIT_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_TOLERANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "eplab", version, about = "Spectral laboratory for the heat-conducting Euler-Poisson system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for the initial data and ensembles.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "EPLAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Kappa,
    Dt,
}

#[derive(Subcommand)]
enum Command {
    /// Picard iteration for one initial datum.
    Simulate(Common),
    /// Moser, commutator, composition and Bernstein ensembles.
    Inequalities(Common),
    /// Sweep over the heat coefficient or the time step.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "kappa")]
        kind: SweepKind,
    },
    /// Lipschitz dependence on the initial data.
    Uniqueness(Common),
    /// Acceptance criteria; exits with 4 when any fails.
    Check {
        #[command(flatten)]
        common: Common,
        /// Criteria to run, e.g. `1,2,14`; defaults to the config's list or all.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Cfl { .. } => EXIT_CONFIG,
        Error::Divergence { .. } | Error::BlowUp { .. } | Error::Vacuum { .. } => EXIT_DIVERGENCE,
        _ => EXIT_ERROR,
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let path = common.config.as_deref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.data.seed = seed;
        cfg.ensemble.seed = seed;
    }
    Ok(cfg)
}

fn output_dir(common: &Common, cfg: Option<&RunConfig>, fallback: &str) -> PathBuf {
    common
        .output
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| Path::new("runs").join(fallback))
}

fn experiment(common: &Common, kind: Experiment, label: &str) -> Result<u8, Error> {
    let mut cfg = load(common)?;
    cfg.experiment = kind;
    let dir = output_dir(common, Some(&cfg), label);
    let outcome = eplab::harness::run_experiment(&cfg, &dir)?;
    if let Some(summary) = &outcome.manifest.summary {
        println!("{}", summary.to_table());
    }
    println!("wrote {}", dir.display());
    Ok(if outcome.diverged { EXIT_DIVERGENCE } else { 0 })
}

fn check(common: &Common, criteria: &[u8]) -> Result<u8, Error> {
    let cfg = common.config.as_ref().map(|_| load(common)).transpose()?;
    let tol = cfg.as_ref().map_or_else(Tolerances::default, |c| c.tolerances.clone());
    let ids: Vec<u8> = if criteria.is_empty() {
        cfg.as_ref().map(|c| c.check.criteria.clone()).unwrap_or_default()
    } else {
        criteria.to_vec()
    };
    if let Some(id) = ids.iter().find(|&&c| !(1..=14).contains(&c)) {
        return Err(Error::Config(format!("no acceptance criterion {id}")));
    }
    let outcomes = Acceptance::new(tol).run(&ids, |o| println!("{}", o.line()));
    if common.output.is_some() || cfg.as_ref().is_some_and(|c| c.output_dir.is_some()) {
        let dir = output_dir(common, cfg.as_ref(), "check");
        std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        std::fs::write(dir.join("check.json"), serde_json::to_string_pretty(&outcomes)?)?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { 0 } else { EXIT_TOLERANCE })
}

fn dispatch(cmd: &Command) -> Result<u8, Error> {
    match cmd {
        Command::Simulate(c) => experiment(c, Experiment::Simulate, "simulate"),
        Command::Inequalities(c) => experiment(c, Experiment::Inequalities, "inequalities"),
        Command::Sweep { common, kind: SweepKind::Kappa } => experiment(common, Experiment::KappaSweep, "kappa_sweep"),
        Command::Sweep { common, kind: SweepKind::Dt } => {
            experiment(common, Experiment::ConvergenceStudy, "convergence_study")
        }
        Command::Uniqueness(c) => experiment(c, Experiment::Uniqueness, "uniqueness"),
        Command::Check { common, criteria } => check(common, criteria),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate(c) | Command::Inequalities(c) | Command::Uniqueness(c) => c,
        Command::Sweep { common, .. } | Command::Check { common, .. } => common,
    };
    let run = || dispatch(&cli.command);
    let result = match common.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => par::with_threads(n, run),
        None => run(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("eplab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
