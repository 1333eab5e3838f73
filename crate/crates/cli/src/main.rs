//! `clipvqa`: command-line driver for the answer-vocabulary, training and
//! evaluation pipeline.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clipvqa::{AnswerabilityPolicyKind, ScoreMode};

#[derive(Debug, Parser)]
#[command(name = "clipvqa", version, about = "Gated answer/answer-type heads over frozen image and question features")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the answer vocabulary and type table from a training split.
    BuildVocab(BuildVocabArgs),
    /// Train a head against an existing vocabulary and write a checkpoint.
    Train(TrainArgs),
    /// Write challenge-style predictions for a split.
    Predict(PredictArgs),
    /// Score predictions against crowd answers and answerability labels.
    Evaluate(EvaluateArgs),
    /// Summarise one or more feature files.
    InspectFeatures(InspectArgs),
}

#[derive(Debug, Args)]
struct BuildVocabArgs {
    #[arg(long, value_name = "PATH")]
    annotations: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, default_value = "simple", value_name = "MODE")]
    score_mode: ScoreMode,
    /// Count each distinct answer once per sample instead of every crowd answer.
    #[arg(long)]
    per_sample_frequency: bool,
    /// JSON answer-type rule table replacing the built-in one.
    #[arg(long, value_name = "PATH")]
    type_rules: Option<PathBuf>,
    /// Crowd answers required per sample.
    #[arg(long, default_value_t = 10, value_name = "N")]
    answers_per_sample: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    annotations: PathBuf,
    #[arg(long, value_name = "PATH")]
    image_features: PathBuf,
    #[arg(long, value_name = "PATH")]
    text_features: PathBuf,
    /// Vocabulary from `build-vocab`. Training never builds one itself.
    #[arg(long, value_name = "PATH")]
    vocab: PathBuf,
    /// JSON training configuration; unspecified fields take defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Overrides the configuration seed (default 42).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, default_value_t = 10, value_name = "N")]
    answers_per_sample: usize,
    /// Held-out split used to keep the best epoch.
    #[arg(long, value_name = "PATH", requires_all = ["val_image_features", "val_text_features"])]
    val_annotations: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "val_annotations")]
    val_image_features: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "val_annotations")]
    val_text_features: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnsembleArg {
    ProbabilityMean,
    LogitMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PositiveArg {
    Answerable,
    Unanswerable,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, value_name = "PATH")]
    annotations: PathBuf,
    /// One file shared by every checkpoint, or one per checkpoint.
    #[arg(long, value_name = "PATH", required = true)]
    image_features: Vec<PathBuf>,
    #[arg(long, value_name = "PATH", required = true)]
    text_features: Vec<PathBuf>,
    #[arg(long, value_name = "PATH")]
    vocab: PathBuf,
    /// Repeat for an ensemble.
    #[arg(long, value_name = "PATH", required = true)]
    checkpoint: Vec<PathBuf>,
    #[arg(long, default_value = "type", value_name = "POLICY")]
    answerability_policy: AnswerabilityPolicyKind,
    #[arg(long, value_enum, default_value_t = EnsembleArg::ProbabilityMean)]
    ensemble: EnsembleArg,
    /// Comma-separated ensemble weights summing to 1 (default uniform).
    #[arg(long, value_delimiter = ',', value_name = "W")]
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Predictions JSON.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Accepted for symmetry with the other subcommands; prediction is deterministic.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Report JSON (default: standard output).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write the predictions.
    #[arg(long, value_name = "PATH")]
    predictions: Option<PathBuf>,
    #[arg(long, default_value = "simple", value_name = "MODE")]
    score_mode: ScoreMode,
    #[arg(long, value_enum, default_value_t = PositiveArg::Answerable)]
    positive_class: PositiveArg,
    /// Rule table for the per-type breakdown (default: built-in).
    #[arg(long, value_name = "PATH")]
    type_rules: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(required = true, value_name = "PATH")]
    files: Vec<PathBuf>,
}

fn exit_code(err: &clipvqa::Error) -> u8 {
    match err {
        clipvqa::Error::Io { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::BuildVocab(a) => commands::build_vocab(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::InspectFeatures(a) => commands::inspect_features(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
