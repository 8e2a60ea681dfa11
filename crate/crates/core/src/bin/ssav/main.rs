mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssav::Method;

use manifest::Failure;

/// Explicit SSAV integration of kinetic Langevin dynamics: validation, studies and sampling.
#[derive(Debug, Parser)]
#[command(name = "ssav", version)]
struct Cli {
    /// Seed of every random number in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the path loop (falls back to SSAV_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a model: gradient, auxiliary-variable floor, energy identity, explicit-vs-implicit agreement.
    Check(CheckArgs),
    /// Run one of the benchmark studies and write CSV + JSON results.
    Study(StudyArgs),
    /// Sample endpoints of many paths and compare with the invariant density.
    Sample(SampleArgs),
    /// Simulate and record a single trajectory.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for the run manifest; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random states for the energy identity.
    #[arg(long, default_value_t = 100_000)]
    cases: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    Strong,
    Weak,
    Energy,
    EnergyEvolution,
    Longtime,
    Moments,
    Expint,
}

/// Inclusive level range written `a..b` or `a..=b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LevelRange(u32, u32);

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once("..=")
            .or_else(|| s.split_once(".."))
            .ok_or_else(|| format!("expected a..b, got {s:?}"))?;
        let a: u32 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: u32 = b.trim().parse().map_err(|e| format!("{e}"))?;
        if a > b {
            return Err(format!("empty range {s:?}"));
        }
        Ok(LevelRange(a, b))
    }
}

#[derive(Debug, Args)]
struct StudyArgs {
    kind: StudyKind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "ssav-out")]
    out: PathBuf,
    /// Monte Carlo paths (study-specific default).
    #[arg(long)]
    paths: Option<usize>,
    /// Coarse levels k (h = T/2^k), inclusive: `6..11`.
    #[arg(long)]
    k_range: Option<LevelRange>,
    /// Reference level.
    #[arg(long)]
    k_ref: Option<u32>,
    /// Time horizon.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Stepsize for single-level studies.
    #[arg(long)]
    h: Option<f64>,
    /// Record every this many steps.
    #[arg(long)]
    record_every: Option<usize>,
    /// Moment orders for `moments`.
    #[arg(long, value_delimiter = ',')]
    p: Vec<u32>,
    /// Energy scale δ for `expint`.
    #[arg(long)]
    delta: Option<f64>,
    /// Discount rate λ for `expint` (default δ‖Γ‖²).
    #[arg(long)]
    lambda: Option<f64>,
    /// Test functions by name, e.g. `20sin(1+|x|)`.
    #[arg(long, value_delimiter = ',')]
    functions: Vec<String>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "ssav", value_parser = Method::from_str)]
    method: Method,
    #[arg(long = "T", default_value_t = 500.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0078125)]
    h: f64,
    #[arg(long, default_value_t = 5000)]
    paths: usize,
    #[arg(long, default_value = "ssav-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    bins: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "ssav", value_parser = Method::from_str)]
    method: Method,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0078125)]
    h: f64,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    #[arg(long, default_value = "ssav-out")]
    out: PathBuf,
}

fn init_threads(flag: Option<usize>) -> Result<(), Failure> {
    let env = std::env::var("SSAV_THREADS").ok();
    let n = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(s)) => Some(
            s.parse::<usize>()
                .map_err(|_| Failure::Usage(format!("SSAV_THREADS must be a positive integer, got {s:?}")))?,
        ),
        (None, None) => None,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(manifest::EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = init_threads(cli.threads).and_then(|()| match &cli.command {
        Command::Check(a) => commands::check(a, cli.seed),
        Command::Study(a) => commands::study(a, cli.seed),
        Command::Sample(a) => commands::sample(a, cli.seed),
        Command::Simulate(a) => commands::simulate(a, cli.seed),
    });
    match outcome {
        Ok(verdict) => ExitCode::from(verdict.exit_code()),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges() {
        assert_eq!("6..8".parse::<LevelRange>().unwrap(), LevelRange(6, 8));
        assert_eq!("6..=11".parse::<LevelRange>().unwrap(), LevelRange(6, 11));
        assert!("8..6".parse::<LevelRange>().is_err());
        assert!("6".parse::<LevelRange>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
