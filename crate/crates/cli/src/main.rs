//! `boostlab` - two-boost chord search and confinement certificates for
//! planar magnetic Hamiltonians, from the command line.

mod commands;
mod config;

use std::fmt::Display;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{parse_pair, parse_state, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Malformed invocation: exit 2.
    Usage(String),
    /// Well-formed request the domain rejects (thresholds, empty fibers,
    /// failed preconditions): exit 3, reported as structured JSON.
    Domain(String),
    /// I/O or serialization failure: exit 4.
    Internal(String),
}

impl CliError {
    pub fn domain(e: impl Display) -> Self {
        CliError::Domain(e.to_string())
    }

    pub fn internal(e: impl Display) -> Self {
        CliError::Internal(e.to_string())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn report(&self) {
        match self {
            CliError::Usage(msg) => eprintln!("usage error: {msg}"),
            CliError::Domain(msg) => {
                eprintln!("domain failure: {msg}");
                println!(
                    "{}",
                    serde_json::json!({ "error": { "kind": "domain", "message": msg } })
                );
            }
            CliError::Internal(msg) => eprintln!("internal error: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "boostlab",
    version,
    about = "Two-boost chords and confinement certificates for planar magnetic Hamiltonians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Trajectory export format for `propagate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

/// Which certificate(s) `verify` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Decay,
    Hset,
    Gap,
    NoReturn,
    NoReturnTruncated,
    NoMax,
    All,
}

#[derive(clap::Args, Debug, Default)]
struct CommonArgs {
    /// Model descriptor: `free`, `powerlaw:a=2,R1=1` or `cr3bp:mu=0.5[,R1=1.2]`.
    #[arg(long)]
    model: Option<String>,
    /// Energy value.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (file for reports/CSV, directory for chords).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed for the sampled certificates.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the energy thresholds and derived radii for decay constants (a, R1).
    Thresholds {
        #[arg(long)]
        a: f64,
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run certificate verifiers against a potential model (exit 0 iff all pass).
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Which check to run.
        #[arg(value_enum, default_value = "all")]
        which: Check,
        /// Sample count per sampled certificate.
        #[arg(long)]
        samples: Option<u64>,
        /// Grid resolution per axis for grid-based certificates.
        #[arg(long)]
        grid: Option<usize>,
        /// Outer radius for the decay check (default 100 R1).
        #[arg(long)]
        r_max: Option<f64>,
        /// Truncation radius for the membership check (default R1 + 2a/e(c)).
        #[arg(long = "R2")]
        r2: Option<f64>,
        /// Gap constant for the truncated no-return check (default e(c)).
        #[arg(long)]
        e: Option<f64>,
    },
    /// Search for fixed-energy chords between the fibers over q0 and q1.
    FindChord {
        #[command(flatten)]
        common: CommonArgs,
        /// Departure position `x,y`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        q0: Option<[f64; 2]>,
        /// Arrival position `x,y`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        q1: Option<[f64; 2]>,
        #[arg(long)]
        psi_grid: Option<usize>,
        #[arg(long)]
        t_grid: Option<usize>,
        #[arg(long)]
        min_eta: Option<f64>,
        #[arg(long)]
        max_eta: Option<f64>,
    },
    /// Integrate a state and export the trajectory as CSV.
    Propagate {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial state `q1,q2,p1,p2`.
        #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
        state: Option<[f64; 4]>,
        /// Duration.
        #[arg(long)]
        t: Option<f64>,
        /// Number of output rows.
        #[arg(long)]
        output_points: Option<usize>,
        /// Truncate the potential at this radius (needs --c).
        #[arg(long = "R2")]
        r2: Option<f64>,
        /// Output format.
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("BOOSTLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = run(cli);
    let code = match result {
        Ok(code) => code,
        Err(err) => {
            err.report();
            err.exit_code()
        }
    };
    std::process::exit(code);
}

fn merged(common: CommonArgs, flags: RunConfig) -> Result<RunConfig, CliError> {
    let base = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        model: common.model,
        c: common.c,
        out: common.out,
        seed: common.seed,
        ..flags
    };
    Ok(base.merged_under(flags))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Thresholds { a, r1, c, out } => commands::run_thresholds(a, r1, c, out.as_deref()),
        Command::Verify {
            common,
            which,
            samples,
            grid,
            r_max,
            r2,
            e,
        } => {
            let cfg = merged(
                common,
                RunConfig {
                    samples,
                    grid,
                    r_max,
                    r2,
                    e,
                    ..RunConfig::default()
                },
            )?;
            commands::run_verify(which, &cfg)
        }
        Command::FindChord {
            common,
            q0,
            q1,
            psi_grid,
            t_grid,
            min_eta,
            max_eta,
        } => {
            let cfg = merged(
                common,
                RunConfig {
                    q0,
                    q1,
                    psi_grid,
                    t_grid,
                    min_eta,
                    max_eta,
                    ..RunConfig::default()
                },
            )?;
            commands::run_find_chord(&cfg)
        }
        Command::Propagate {
            common,
            state,
            t,
            output_points,
            r2,
            format,
        } => {
            let cfg = merged(
                common,
                RunConfig {
                    state,
                    t,
                    output_points,
                    r2,
                    ..RunConfig::default()
                },
            )?;
            commands::run_propagate(&cfg, format)
        }
    }
}
