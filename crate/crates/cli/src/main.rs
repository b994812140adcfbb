//! `signdet` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or data error, 1 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use signdet::{NormalizationMode, PointSubset};

#[derive(Debug, Parser)]
#[command(name = "signdet", version, about = "Real-time sign language detection from pose landmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn pose files into SGNF feature files
    Extract(ExtractArgs),
    /// Train a classifier on a directory of SGNF files (50:25:25 split)
    Train(TrainArgs),
    /// Frame accuracy, span statistics and error taxonomy of a model
    Eval(EvalArgs),
    /// Per-frame engine latency on random frames
    Bench(BenchArgs),
    /// Per-frame detection over a JSON-lines pose stream (stdin -> stdout)
    Stream(StreamArgs),
    /// Write a seeded synthetic corpus of pose files and gloss segments
    Synth(SynthArgs),
    /// Describe a model file and dump per-landmark input weights
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Pose JSON file or directory of per-frame OpenPose files
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    poses: Option<PathBuf>,
    /// Directory of `<id>.pose.json` files with sibling `<id>.csv` gloss
    /// files; every pair becomes `<out>/<id>.sgnf`
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Frame rate; overrides the pose file header
    #[arg(long)]
    fps: Option<f64>,
    /// pose-all, pose-body, pose-hands or bbox
    #[arg(long, default_value = "pose-body")]
    subset: PointSubset,
    /// Gloss segments (start_ms,end_ms rows); without it every frame is
    /// labeled not-signing
    #[arg(long, conflicts_with = "corpus")]
    labels: Option<PathBuf>,
    /// per-sequence, trailing or trailing-N
    #[arg(long, default_value = "per-sequence")]
    normalization: NormalizationMode,
    /// Output file (or directory with --corpus)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Lstm,
    Linear,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory of SGNF files
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "lstm")]
    model: ModelKind,
    /// Context frames of the linear model
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Point subset of the features; inferred from their width if omitted
    #[arg(long)]
    subset: Option<PointSubset>,
    /// Normalization the features were extracted with (stored in the model)
    #[arg(long, default_value = "per-sequence")]
    normalization: NormalizationMode,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Truncated-BPTT chunk length in frames
    #[arg(long, default_value_t = 500)]
    chunk: usize,
    /// LSTM hidden size
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitChoice {
    All,
    Train,
    Dev,
    Test,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory of SGNF files
    #[arg(long)]
    data: PathBuf,
    /// Which part of the 50:25:25 split to evaluate on
    #[arg(long, value_enum, default_value = "all")]
    split: SplitChoice,
    /// Write the error table as CSV (type,count,mean_s,std_s)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Model file; without it a randomly initialized LSTM (hidden 64) is timed
    #[arg(long)]
    model: Option<PathBuf>,
    /// Subset of the random model
    #[arg(long, default_value = "pose-all", conflicts_with = "model")]
    subset: PointSubset,
    #[arg(long, default_value_t = 10_000)]
    frames: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Also write comma-separated rows here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StreamArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    fps: f64,
    /// Trailing normalization window in frames
    #[arg(long, default_value_t = signdet::pose_features::DEFAULT_TRAILING_WINDOW)]
    window: usize,
    /// Read the whole stream first and normalize by its mean shoulder
    /// distance (offline replay) instead of a trailing window
    #[arg(long)]
    per_sequence: bool,
    /// Input file instead of stdin
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    sequences: usize,
    /// Seconds per sequence
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    #[arg(long, default_value_t = 50.0)]
    fps: f64,
    /// Also write SGNF features for this subset into <out>/features
    #[arg(long)]
    features: Option<PointSubset>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Print only the top N landmarks by weight
    #[arg(long)]
    top: Option<usize>,
}

/// A user-facing failure (bad input data or an inconsistent request).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let data_error = err.chain().any(|e| {
        e.is::<signdet::Error>() || e.is::<UsageError>() || e.is::<std::io::Error>() || e.is::<serde_json::Error>()
    });
    if data_error {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Stream(a) => commands::stream(a),
        Command::Synth(a) => commands::synth(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
