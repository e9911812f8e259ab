use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recurlab::experiment::{load_config, run_experiment, ConfigError, RunError, Scenario};

#[derive(Parser)]
#[command(name = "recurlab", version, about = "Recurrence, hitting and perturbation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recurrence scores of sampled points, plus an optional window union.
    Recurrence(Common),
    /// Hitting scores toward a target and a W_p window union estimate.
    Hitting(Common),
    /// Tower redirect of a grid permutation with its periodicity report.
    Perturb(Common),
    /// Normalized correlations and the superpolynomial decay classifier.
    Correlations(Common),
    /// Local dimension of the uniform measure from ball masses.
    Dimension(Common),
    /// Shrinking-target hit fraction.
    Bc(Common),
    /// Sampled distance between two maps.
    Mapdist(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    samples: Option<u64>,
    /// Output directory; defaults to `recurlab-out/<scenario>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, value_name = "N", env = "RECURLAB_THREADS")]
    threads: Option<usize>,
    /// Override a configuration key, e.g. `--set perturb.delta=0.125`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Command {
    fn split(self) -> (Scenario, Common) {
        match self {
            Command::Recurrence(c) => (Scenario::Recurrence, c),
            Command::Hitting(c) => (Scenario::Hitting, c),
            Command::Perturb(c) => (Scenario::Perturb, c),
            Command::Correlations(c) => (Scenario::Correlations, c),
            Command::Dimension(c) => (Scenario::Dimension, c),
            Command::Bc(c) => (Scenario::BorelCantelli, c),
            Command::Mapdist(c) => (Scenario::MapDistance, c),
        }
    }
}

fn config_error(key: &str, reason: impl ToString) -> RunError {
    RunError::Config(ConfigError {
        key: key.into(),
        line: None,
        reason: reason.to_string(),
    })
}

fn run(scenario: Scenario, args: Common) -> Result<bool, RunError> {
    let source = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| config_error("--config", format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut sets = Vec::new();
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| config_error("--set", format!("`{s}` is not KEY=VALUE")))?;
        sets.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut loaded = load_config(&source, &sets)?;
    if let Some(seed) = args.seed {
        loaded.override_value("seed", |c| c.seed = seed);
    }
    if let Some(samples) = args.samples {
        loaded.override_value("samples", |c| c.samples = Some(samples));
    }
    if let Some(out) = args.out {
        loaded.override_value("out", |c| c.out = Some(out));
    }
    if let Some(threads) = args.threads {
        loaded.override_value("threads", |c| c.threads = Some(threads));
    }
    let out_dir = loaded
        .config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("recurlab-out").join(scenario.to_string()));
    let mut pool = rayon::ThreadPoolBuilder::new();
    match loaded.config.threads {
        Some(0) => return Err(config_error("threads", "must be positive")),
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = pool.build().map_err(|e| config_error("threads", e))?;
    let manifest = pool.install(|| run_experiment(&loaded, scenario, &out_dir))?;
    for failure in &manifest.failures {
        eprintln!("assertion failed: {failure}");
    }
    println!("{}", out_dir.join("summary.txt").display());
    Ok(manifest.succeeded())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = cli.command.split();
    match run(scenario, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ RunError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
