use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uaslab::config::{load_config, parse_raw, resolve_seed, ConfigError, ExperimentKind, SEED_ENV};
use uaslab::error::Error;
use uaslab::experiment::{eval_bounds, run_experiment, write_outputs};
use uaslab::selfcheck;
use uaslab::trials::resolve_jobs;

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "uaslab",
    version,
    about = "Stability and risk experiments for projected subgradient methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides the config and UASLAB_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Accepted for symmetry with the run subcommands; unused.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Coupled-trajectory stability against the closed-form upper bounds.
    RunStability(RunArgs),
    /// The adversarial lower-bound construction.
    RunLowerbound(RunArgs),
    /// Excess-risk decomposition on synthetic data.
    RunRisk(RunArgs),
    /// Generalization gap of multi-pass SGD.
    RunMultipass(RunArgs),
    /// Differentially private noisy SGD.
    RunDp(RunArgs),
    /// Print every closed-form bound for the config's parameters.
    EvalBounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the randomized property suites.
    Selfcheck(SelfcheckArgs),
}

enum Failure {
    Config(String),
    Io(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
            Failure::Invariant(_) => EXIT_INVARIANT,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Invariant(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), Failure> {
    let text = read(&args.config)?;
    let env = std::env::var(SEED_ENV).ok();
    let cfg = load_config(&text, Some(kind), args.seed, env.as_deref())?;
    let outcome = run_experiment(&cfg, resolve_jobs(Some(args.jobs))).map_err(|e| match e {
        Error::Precondition { .. } | Error::InvalidParameter { .. } => Failure::Config(e.to_string()),
        other => Failure::Invariant(other.to_string()),
    })?;
    for line in &outcome.lines {
        println!("{line}");
    }
    let dir = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("uaslab-{}", kind.name())));
    write_outputs(&dir, &cfg, &outcome).map_err(|e| Failure::Io(format!("cannot write {}: {e}", dir.display())))?;
    println!("wrote {}", dir.display());
    if outcome.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = outcome
            .checks
            .iter()
            .filter(|c| c.hard && !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure::Invariant(format!("invariant violated: {}", failed.join(", "))))
    }
}

fn eval(config: PathBuf) -> Result<(), Failure> {
    let raw = parse_raw(&read(&config)?)?;
    let mut any_ok = false;
    for (name, value) in eval_bounds(&raw) {
        match value {
            Ok(v) => {
                any_ok = true;
                println!("{name} = {v}");
            }
            Err(reason) => println!("{name} = n/a ({reason})"),
        }
    }
    if any_ok {
        Ok(())
    } else {
        Err(Failure::Config("no bound could be evaluated".into()))
    }
}

fn check(args: SelfcheckArgs) -> Result<(), Failure> {
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(args.seed, None, env.as_deref())?;
    let checks = selfcheck::run_all(seed).map_err(|e| Failure::Invariant(e.to_string()))?;
    for c in &checks {
        println!("{}", c.line());
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Invariant("property suite failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunStability(a) => run(ExperimentKind::Stability, a),
        Command::RunLowerbound(a) => run(ExperimentKind::LowerBound, a),
        Command::RunRisk(a) => run(ExperimentKind::Risk, a),
        Command::RunMultipass(a) => run(ExperimentKind::Multipass, a),
        Command::RunDp(a) => run(ExperimentKind::Dp, a),
        Command::EvalBounds { config } => eval(config),
        Command::Selfcheck(a) => check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
