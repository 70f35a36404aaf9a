//! `idos` — integrated density of states experiments from the terminal.
//!
//! Every run reads one JSON config, writes hashed artifacts plus a
//! manifest into an output directory, and exits 0 on pass, 2 when a
//! numerical check fails, 1 on any error (bad config, I/O, solver).

mod artifacts;
mod config;
mod runs;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use artifacts::TableFormat;
use runs::{Outcome, RunContext};

/// Environment variable holding the default worker count.
const WORKERS_ENV: &str = "IDOS_WORKERS";

#[derive(Parser)]
#[command(
    name = "idos",
    about = "Integrated density of states for random discrete operators",
    version
)]
struct Cli {
    /// Worker threads (default: $IDOS_WORKERS, then the CPU count).
    /// Results are byte-identical for every worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the config's base seed (changes the config hash).
    #[arg(long)]
    seed_override: Option<u64>,
    /// Format for tabular artifacts.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical IDS along the box exhaustion, plus the spread report.
    Ids(RunArgs),
    /// Localized-trace density of states on a padded block.
    Dos(RunArgs),
    /// Verification battery: trace formula, Laplace route, boundary
    /// independence, interval dichotomy, spectrum constancy.
    Check(RunArgs),
    /// Finite-cluster atom predictions against measured IDS jumps.
    Atoms(RunArgs),
    /// Generate and validate a Delone point set; export its operator.
    Delone(RunArgs),
    /// Render the curve CSVs in a run directory to SVG (no recomputation).
    Plot {
        /// Run directory containing ids.csv and/or dos.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a recorded manifest and verify artifacts byte for byte.
    Replay {
        /// Path to a manifest.json from a previous run.
        #[arg(long)]
        manifest: PathBuf,
        /// Staging directory for the re-run (default: <manifest dir>/replay).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn build_context(args: &RunArgs, workers: usize) -> Result<RunContext, String> {
    let loaded = config::load_config(&args.config, args.seed_override)?;
    let out = match (&args.out, &loaded.config.out_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => {
            return Err(
                "no output directory: pass --out or set `out_dir` in the config".to_string(),
            )
        }
    };
    let format = match args.format {
        FormatArg::Csv => TableFormat::Csv,
        FormatArg::Json => TableFormat::Json,
    };
    Ok(RunContext {
        loaded,
        out,
        workers,
        format,
    })
}

fn dispatch(cli: Cli) -> Result<Outcome, String> {
    let workers = resolve_workers(cli.workers);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| format!("worker pool: {e}"))?;
    match &cli.command {
        Command::Ids(args) => runs::run_ids(&build_context(args, workers)?),
        Command::Dos(args) => runs::run_dos(&build_context(args, workers)?),
        Command::Check(args) => runs::run_check(&build_context(args, workers)?),
        Command::Atoms(args) => runs::run_atoms(&build_context(args, workers)?),
        Command::Delone(args) => runs::run_delone(&build_context(args, workers)?),
        Command::Plot { out } => runs::run_plot(out),
        Command::Replay { manifest, out } => {
            runs::run_replay(manifest, out.as_deref(), workers)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::FailedChecks(names)) => {
            eprintln!("check failed: {}", names.join(", "));
            ExitCode::from(2)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
