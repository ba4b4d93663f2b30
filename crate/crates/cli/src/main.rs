mod check;
mod config;
mod evaluation;
mod output;
mod retrieval;
mod simulation;

use std::path::PathBuf;
use std::process::ExitCode;

use amr_core::{MANIFEST_FORMAT_VERSION, STORE_FORMAT_VERSION};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::RunConfig;

/// Failures with a dedicated exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Join(String),
}

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_JOIN: u8 = 4;

/// Language-based audio moment retrieval: simulate data, run the
/// similarity baseline and evaluate.
#[derive(Debug, Parser)]
#[command(name = "amr")]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate moment-annotated long audio from foreground clips and backgrounds.
    Simulate(simulation::SimulateArgs),
    /// Write mock embedding stores driven by manifest annotations.
    MockEmbed(retrieval::MockEmbedArgs),
    /// Retrieve moments by thresholding window-query similarity.
    Baseline(retrieval::BaselineArgs),
    /// Grid-search the baseline threshold and median length on a validation set.
    Tune(retrieval::TuneArgs),
    /// Score predictions with R1@θ, mAP@θ and average mAP.
    Eval(evaluation::EvalArgs),
    /// Frame-level sound event detection precision, recall and F1.
    SedEval(evaluation::SedEvalArgs),
    /// Set-prediction loss of a candidate set against ground-truth moments.
    Loss(evaluation::LossArgs),
    /// Re-read produced files and verify they round-trip unchanged.
    Check(check::CheckArgs),
}

#[derive(Debug, Args)]
pub struct OutputArg {
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn version_text() -> String {
    format!(
        "{} (manifest format {MANIFEST_FORMAT_VERSION}, embedding store format {STORE_FORMAT_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

fn init_logging(cli: &Cli, cfg: &RunConfig) {
    let base = cfg
        .log_level
        .as_deref()
        .and_then(|l| l.parse().ok())
        .unwrap_or(log::LevelFilter::Info);
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => base,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Config(_) => EXIT_CONFIG,
                Failure::Join(_) => EXIT_JOIN,
            };
        }
        if let Some(e) = cause.downcast_ref::<amr_core::Error>() {
            return match e {
                amr_core::Error::Io { .. }
                | amr_core::Error::Wav { .. }
                | amr_core::Error::Parse { .. }
                | amr_core::Error::Store { .. }
                | amr_core::Error::Json(_) => EXIT_IO,
                amr_core::Error::Item { .. } if e.is_io() => EXIT_IO,
                _ => EXIT_CONFIG,
            };
        }
        if cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_IO;
        }
    }
    1
}

fn run(cli: &Cli, cfg: RunConfig) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulation::run(a, cfg),
        Command::MockEmbed(a) => retrieval::mock_embed(a, cfg),
        Command::Baseline(a) => retrieval::baseline(a, cfg),
        Command::Tune(a) => retrieval::tune(a, cfg),
        Command::Eval(a) => evaluation::eval(a, cfg),
        Command::SedEval(a) => evaluation::sed_eval(a, cfg),
        Command::Loss(a) => evaluation::loss(a, cfg),
        Command::Check(a) => check::run(a),
    }
}

fn main() -> ExitCode {
    let version: &'static str = Box::leak(version_text().into_boxed_str());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let cfg = match RunConfig::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    init_logging(&cli, &cfg);
    match run(&cli, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
