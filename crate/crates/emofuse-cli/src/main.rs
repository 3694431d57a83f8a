//! `emofuse` — the pipeline CLI.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 I/O error. Errors
//! print one machine-parsable line to stderr:
//! `error: kind=<kind> msg="..."`.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use emofuse::Error;

#[derive(Parser)]
#[command(
    name = "emofuse",
    version,
    about = "Emotion-cues extraction and fusion for conversational emotion tasks",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// RNG seed (overrides the config file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (or file for `featurize`); the only place the
    /// process writes.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tag a conversation file: word matrices, pair tags, importance scores.
    Tag(TagArgs),
    /// Extract mel + prosody features from one WAV file.
    Featurize(FeaturizeArgs),
    /// Knowledge-base utilities.
    Kb(KbArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint: metrics and confusion matrix.
    Eval(EvalArgs),
    /// Per-instance predictions as CSV.
    Predict(EvalArgs),
    /// The four-variant ablation grid.
    Ablate(TrainArgs),
    /// Verify every module's gradients against finite differences.
    Gradcheck,
}

#[derive(Args)]
struct TagArgs {
    /// Knowledge-base TSV (head <TAB> relation <TAB> tail).
    #[arg(long)]
    kb: PathBuf,
    /// Conversations JSONL.
    #[arg(long)]
    input: PathBuf,
    /// Function-word lexicon (defaults to the built-in English list).
    #[arg(long)]
    function_words: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Mono PCM WAV input.
    #[arg(long)]
    wav: PathBuf,
}

#[derive(Args)]
struct KbArgs {
    #[command(subcommand)]
    command: KbCmd,
}

#[derive(Subcommand)]
enum KbCmd {
    /// Print triple, vocabulary, and per-relation counts.
    Stats {
        #[arg(long)]
        kb: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// JSON config file (flat keys mirroring the training configuration).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Conversations JSONL.
    #[arg(long)]
    data: PathBuf,
    /// Knowledge-base TSV (defaults to an empty base).
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Function-word lexicon (defaults to the built-in English list).
    #[arg(long)]
    function_words: Option<PathBuf>,
    /// Directory for relative audio paths (defaults to the data file's).
    #[arg(long)]
    audio_base: Option<PathBuf>,

    // command-line overrides of config-file values
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    modality: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    model_dim: Option<usize>,
    #[arg(long)]
    n_heads: Option<usize>,
    #[arg(long)]
    early_stop_acc: Option<f64>,
    /// Bypass the word-importance scaling.
    #[arg(long)]
    no_kwrt: bool,
    /// Bypass the prosody-enhancement residual.
    #[arg(long)]
    no_pe: bool,
    /// Skip bridge fusion; classify from the initial fusion only.
    #[arg(long)]
    no_tmf: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint manifest written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Conversations JSONL.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    function_words: Option<PathBuf>,
    #[arg(long)]
    audio_base: Option<PathBuf>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // usage problems (including no arguments) exit 1
            let _ = err.print();
            return 1;
        }
    };
    let seed = cli.seed;
    let out = cli.out;
    let result = match cli.command {
        Cmd::Tag(args) => commands::tag::run(args, seed, out),
        Cmd::Featurize(args) => commands::featurize::run(args, seed, out),
        Cmd::Kb(args) => match args.command {
            KbCmd::Stats { kb } => commands::kb::stats(&kb),
        },
        Cmd::Train(args) => commands::train::run(args, seed, out),
        Cmd::Eval(args) => commands::eval::run(args, seed, out, false),
        Cmd::Predict(args) => commands::eval::run(args, seed, out, true),
        Cmd::Ablate(args) => commands::ablate::run(args, seed, out),
        Cmd::Gradcheck => commands::gradcheck::run(seed, out),
    };
    match result {
        Ok(code) => code,
        Err(err) => report(&err),
    }
}

fn report(err: &Error) -> i32 {
    let kind = match err {
        Error::Io(_) => "io",
        Error::Parse { .. } => "parse",
        Error::Validation(_) => "validation",
        Error::UnsupportedFormat(_) => "unsupported-format",
        Error::Training(_) => "training",
    };
    eprintln!("error: kind={} msg={:?}", kind, err.to_string());
    match err {
        Error::Io(_) => 2,
        _ => 1,
    }
}
