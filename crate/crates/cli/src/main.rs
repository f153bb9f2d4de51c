//! `rio`: synthetic data, fusion, keypoints, training, re-localization and
//! scoring from the command line.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 when every
//! re-localization attempt failed to align, 1 for anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "rio", version, about = "Object instance re-localization in changing 3D scans")]
struct Cli {
    /// Seed for every random choice (scene layout, initialization, shuffling, RANSAC).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Upper bound on worker threads; 1 forces strictly sequential execution.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// JSON file with parameter sections (corpus, training, loss, model, relocalize).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic benchmark bundle.
    Synth(SynthArgs),
    /// Produce a TSDF volume of one scan of a bundle scene.
    Fuse(FuseArgs),
    /// Detect Harris keypoints on a volume.
    Keypoints(KeypointsArgs),
    /// Train the descriptor on a bundle's training scenes.
    Train(TrainArgs),
    /// Re-localize every query object of a bundle split.
    Relocalize(RelocalizeArgs),
    /// Score predictions, and optionally descriptor matching.
    Evaluate(EvaluateArgs),
}

/// Dataset root, defaulting to `$RIO_DATA_DIR`.
#[derive(Debug, Args)]
struct DataArg {
    #[arg(long, env = "RIO_DATA_DIR")]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output bundle directory.
    #[arg(long, env = "RIO_DATA_DIR")]
    out: PathBuf,
    #[arg(long)]
    scenes: Option<usize>,
    /// Write the hidden variant (no ground truth).
    #[arg(long)]
    hidden: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScanKind {
    Reference,
    Rescan,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long)]
    scene: String,
    #[arg(long, value_enum, default_value_t = ScanKind::Reference)]
    scan: ScanKind,
    /// Exact TSDF from the scene geometry instead of fusing rendered depth.
    #[arg(long)]
    analytic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KeypointsArgs {
    #[arg(long)]
    volume: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScalesArg {
    Multi,
    Fine,
    Coarse,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long, value_enum)]
    stage: StageArg,
    /// Model to continue from; a fresh seeded model otherwise.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Keep the single-scale encoders fixed and train only the fusion layers.
    #[arg(long)]
    freeze_sse: bool,
    /// Learning rate; overrides the config file.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 1)]
    epochs: u32,
    /// Scales of a fresh model.
    #[arg(long, value_enum, default_value_t = ScalesArg::Multi)]
    scales: ScalesArg,
    #[arg(long)]
    out: PathBuf,
    /// Per-step loss curve.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for rio::datasynth::Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Self::Train,
            SplitArg::Val => Self::Val,
            SplitArg::Test => Self::Test,
        }
    }
}

#[derive(Debug, Args)]
struct RelocalizeArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    #[arg(long, required_unless_present = "random_descriptor")]
    model: Option<PathBuf>,
    /// Baseline with geometry-blind random features.
    #[arg(long, conflicts_with = "model")]
    random_descriptor: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-query diagnostics (keypoint counts, inliers, failure reasons).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Ground-truth JSON, or a full bundle directory.
    #[arg(long, env = "RIO_DATA_DIR")]
    ground_truth: PathBuf,
    /// Split to score when the ground truth is a bundle.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    #[arg(long)]
    out: PathBuf,
    /// Plain-text table; it is also printed.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    class_map: Option<PathBuf>,
    #[arg(long, default_value = "rio")]
    method: String,
    /// Also score descriptor matching on dynamic triplets of the split.
    #[arg(long, requires = "prc_csv")]
    matching_model: Option<PathBuf>,
    #[arg(long)]
    prc_csv: Option<PathBuf>,
}

/// Failure classes with stable exit codes.
#[derive(Debug)]
enum CliError {
    Validation(String),
    AlignmentOnly(String),
    Other(String),
}

impl From<rio::RioError> for CliError {
    fn from(e: rio::RioError) -> Self {
        use rio::RioError::*;
        match &e {
            InvalidArgument(_) | Schema(_) | Format(_) | Json(_) | DegenerateInput(_) => CliError::Validation(e.to_string()),
            Io(io) if io.kind() == std::io::ErrorKind::NotFound => CliError::Validation(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn run(cli: Cli) -> CliResult {
    if cli.threads == 0 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.validate()?;
    let ctx = commands::Context { seed: cli.seed, config };
    match cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Fuse(a) => commands::fuse(&ctx, a),
        Command::Keypoints(a) => commands::keypoints(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Relocalize(a) => commands::relocalize(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::AlignmentOnly(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(CliError::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
