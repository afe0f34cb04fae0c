//! `aligncheck`: train corpus models, detect suspicious alignment regions,
//! analyse them against ratings, and generate synthetic test corpora.

mod commands;
mod error;
mod manifest;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "aligncheck", version, about = "Find likely errors in automatic phone alignments")]
struct Cli {
    /// Worker threads for per-recording work (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit phone statistics and both predictors on a corpus.
    Train(TrainArgs),
    /// Run the detectors and write per-recording regions.
    Detect(DetectArgs),
    /// Score recordings, regress ratings on scores and count coincidences.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic corpus with injected errors.
    Synth(SynthArgs),
    /// Find the threshold giving a target region rate on problem recordings.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Alignment records (JSON Lines).
    #[arg(long)]
    pub alignments: PathBuf,
    /// Leave this recording out of training.
    #[arg(long, value_name = "REC_ID")]
    pub exclude: Option<String>,
    /// Model file to write.
    #[arg(long, value_name = "MODEL_PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub alignments: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of `<rec_id>.wav` files; without it loud and quiet are skipped.
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// How to reduce stereo audio: mix, left or right.
    #[arg(long, default_value = "mix")]
    pub channel: String,
    /// Detector configuration (TOML); falls back to $ALIGNCHECK_CONFIG.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory written by `detect`.
    #[arg(long)]
    pub regions: PathBuf,
    #[arg(long)]
    pub alignments: PathBuf,
    /// `rec_id,rating` CSV; without it only scores and coincidences are reported.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Report file to write.
    #[arg(long, value_name = "REPORT")]
    pub out: PathBuf,
    /// Pairing window for coincidences, in seconds.
    #[arg(long, default_value_t = aligncheck_core::analysis::PAIRING_WINDOW_S)]
    pub window: f64,
    /// Chance model for expected pairings: interval or point.
    #[arg(long, default_value = "interval")]
    pub chance: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator settings (TOML); defaults when absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub alignments: PathBuf,
    /// Needed for unexpected and badlength.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// unexpected, improbable or badlength.
    #[arg(long)]
    pub feature: String,
    #[arg(long)]
    pub target_per_hour: f64,
    /// Comma-separated recording ids, or @FILE with one id per line
    /// (default: every recording).
    #[arg(long, value_name = "LIST")]
    pub problem_files: Option<String>,
    /// Base configuration; falls back to $ALIGNCHECK_CONFIG.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the base configuration with the new threshold here.
    #[arg(long)]
    pub write_config: Option<PathBuf>,
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args()))
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(usize::from(jobs)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Train(a) => commands::train::run(a),
        Command::Detect(a) => commands::detect::run(a),
        Command::Analyze(a) => commands::analyze::run(a),
        Command::Synth(a) => commands::synth::run(a),
        Command::Calibrate(a) => commands::calibrate::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
