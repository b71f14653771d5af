use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowtriage::synth::ProfileKind;

mod commands;
mod error;

use error::CliError;

#[derive(Parser)]
#[command(name = "flowtriage", version, about = "Triage taint-flow reports from Node.js dynamic analysis")]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check provenance graphs against the structural rules.
    Validate(ValidateArgs),
    /// Build or apply an operation vocabulary and write encoded graphs.
    Encode(EncodeArgs),
    /// Train and evaluate every configured model for every seed.
    Train(TrainArgs),
    /// Score a saved model on a labeled manifest.
    Evaluate(EvaluateArgs),
    /// Emit a ranked report of packages by model score.
    Rank(RankArgs),
    /// Cohen's kappa between two verdict files.
    Kappa(KappaArgs),
    /// Expected metrics of random predictors.
    Baseline(BaselineArgs),
    /// Pick a score threshold from a precision or false-negative target.
    OperatingPoint(OperatingPointArgs),
    /// Classify packages with a chat-completion model.
    LlmZeroShot(LlmArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Graph JSON files.
    graphs: Vec<PathBuf>,
    /// Validate every graph listed in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Restrict to one split (train, validate, test).
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Existing vocabulary; without it one is built from the train split.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment TOML.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seeds`, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Overrides `models`, comma separated.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Write the CSV report here and print a JSON summary instead.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KappaArgs {
    /// CSV with `package` and `verdict` columns.
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    pos: u64,
    #[arg(long)]
    neg: u64,
    /// P(vulnerable) of the random predictor; repeatable.
    #[arg(long = "p", default_values_t = [0.5, 1.0, 0.0])]
    p: Vec<f64>,
    /// Also estimate F1 by simulation with this many trials.
    #[arg(long)]
    simulate: Option<usize>,
    #[arg(long, default_value_t = 2025)]
    seed: u64,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "target")]
struct TargetArgs {
    #[arg(long)]
    min_precision: Option<f64>,
    #[arg(long)]
    max_fnr: Option<f64>,
}

#[derive(Args)]
struct OperatingPointArgs {
    /// CSV with `score` and `label` columns, such as a ranked report.
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
}

#[derive(Args)]
struct LlmArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Endpoint TOML (url, model, api_key_env, timeout_secs, think_delimiters).
    #[arg(long)]
    endpoint: Option<PathBuf>,
    /// Chat-completions URL; overrides the endpoint file.
    #[arg(long)]
    url: Option<String>,
    /// Model name; overrides the endpoint file.
    #[arg(long = "llm")]
    llm: Option<String>,
    #[arg(long, default_value_t = flowtriage::llm::DEFAULT_BUDGET)]
    budget: usize,
    /// Append one JSON line per request here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Write per-package verdicts as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "separable")]
    profile: ProfileKind,
    #[arg(long, default_value_t = 100)]
    packages: usize,
    #[arg(long, default_value_t = 2025)]
    seed: u64,
    #[arg(long)]
    vuln_ratio: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return CliError::new("usage", e.to_string().trim_end()).report(2),
    };
    let exec = if cli.sequential { flowtriage::Exec::Sequential } else { flowtriage::Exec::Parallel };
    let result = match cli.command {
        Command::Validate(a) => commands::validate(a, exec),
        Command::Encode(a) => commands::encode(a, exec),
        Command::Train(a) => commands::train(a, exec),
        Command::Evaluate(a) => commands::evaluate(a, exec),
        Command::Rank(a) => commands::rank(a, exec),
        Command::Kappa(a) => commands::kappa(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::OperatingPoint(a) => commands::operating_point(a),
        Command::LlmZeroShot(a) => commands::llm_zero_shot(a, exec),
        Command::Synth(a) => commands::synth(a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(1),
    }
}
