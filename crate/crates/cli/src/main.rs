//! `amrsynth`: Smatch oracle, dataset pipeline and neural score synthesis.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

#[derive(Parser, Debug, Serialize)]
#[command(name = "amrsynth", version, about = "Smatch scoring and fast neural approximations of it")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Base seed; every stage derives its own stream from it.
    #[arg(long, global = true, env = "SMARAGD_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads for pair-level parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Parse an AMR bank and print it normalized.
    Parse(ParseArgs),
    /// Smatch between two AMR banks, pair by pair.
    Smatch(SmatchArgs),
    /// Build scored pair records from two AMR banks.
    Dataset(DatasetArgs),
    /// Replace every token of each pair with pair-local integers.
    Anonymize(AnonymizeArgs),
    /// Multiply anonymized records with random relabelings.
    Augment(AugmentArgs),
    /// Write source/target files for an external alignment seq2seq model.
    #[command(name = "emit-seq2seq")]
    EmitSeq2seq(EmitArgs),
    /// Train a score or vector model.
    Train(TrainArgs),
    /// Predict scores for pair records with a trained model.
    Predict(PredictArgs),
    /// Pairwise similarity matrix over an AMR bank.
    Matrix(MatrixArgs),
    /// Average-linkage clustering of a similarity matrix.
    Cluster(ClusterArgs),
    /// Correlation and alignment upper-bound report.
    Eval(EvalArgs),
    /// Generate synthetic scored pairs.
    #[command(name = "gen-synthetic")]
    GenSynthetic(GenArgs),
    /// Finite-difference check of the model gradients.
    #[command(name = "grad-check")]
    GradCheck(GradCheckArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum AlignerKind {
    Exact,
    Hillclimb,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelOption {
    /// Pair score regression.
    Score,
    /// Per-graph vectors.
    Vector,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelSize {
    /// 60x15 grid, 100-d embeddings, 256+128 filters.
    Standard,
    /// 16x12 grid, 16-d embeddings, 16+8 filters.
    Compact,
    /// 6x5 grid, 8-d embeddings, 4+4 filters.
    Tiny,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Oracle,
    Score,
    Vector,
    Random,
}

#[derive(Args, Debug, Clone, Serialize)]
struct AlignerArgs {
    #[arg(long, value_enum, default_value_t = AlignerKind::Hillclimb)]
    aligner: AlignerKind,
    /// Hill-climbing restarts after the greedy start.
    #[arg(long, default_value_t = amrsynth::align::DEFAULT_RESTARTS)]
    restarts: usize,
    /// Largest smaller-side variable count exact search accepts.
    #[arg(long, default_value_t = amrsynth::align::DEFAULT_EXACT_LIMIT)]
    limit: usize,
}

#[derive(Args, Debug, Serialize)]
struct ParseArgs {
    input: PathBuf,
    /// One line per graph.
    #[arg(long)]
    compact: bool,
    /// Also print the triples.
    #[arg(long)]
    triples: bool,
}

#[derive(Args, Debug, Serialize)]
struct SmatchArgs {
    first: PathBuf,
    second: PathBuf,
    #[command(flatten)]
    aligner: AlignerArgs,
}

#[derive(Args, Debug, Serialize)]
struct DatasetArgs {
    first: PathBuf,
    second: PathBuf,
    /// Output JSONL, or a directory when --split is given.
    #[arg(short, long)]
    output: PathBuf,
    /// Train,dev,test record counts; writes train/dev/test.jsonl into --output.
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<usize>>,
    #[command(flatten)]
    aligner: AlignerArgs,
}

#[derive(Args, Debug, Serialize)]
struct AnonymizeArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AugmentArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Permuted variants per record.
    #[arg(short, default_value_t = 10)]
    k: usize,
    /// Keep the original records next to their variants.
    #[arg(long)]
    keep_originals: bool,
}

#[derive(Args, Debug, Serialize)]
struct EmitArgs {
    input: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Model checkpoint to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Training log CSV (epoch, train_loss, dev_rho).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelOption::Score)]
    model: ModelOption,
    #[arg(long, value_enum, default_value_t = ModelSize::Standard)]
    size: ModelSize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct MatrixArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Oracle)]
    method: Method,
    /// Checkpoint for the score and vector methods.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Matrix TSV; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    aligner: AlignerArgs,
}

#[derive(Args, Debug, Serialize)]
struct ClusterArgs {
    input: PathBuf,
    #[arg(short)]
    k: usize,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    input: PathBuf,
    /// Checkpoint whose predictions are correlated with the gold scores.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Predicted alignments, one `u:v …` line per record.
    #[arg(long)]
    alignments: Option<PathBuf>,
    /// Also report the random-alignment baseline.
    #[arg(long)]
    random: bool,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(short)]
    n: usize,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 2)]
    min_nodes: usize,
    #[arg(long, default_value_t = 8)]
    max_nodes: usize,
    #[arg(long, default_value_t = 0)]
    min_edits: usize,
    #[arg(long, default_value_t = 8)]
    max_edits: usize,
    #[command(flatten)]
    aligner: AlignerArgs,
}

#[derive(Args, Debug, Serialize)]
struct GradCheckArgs {
    #[arg(long, value_enum, default_value_t = ModelOption::Score)]
    model: ModelOption,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Largest relative error accepted.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match amrsynth::par::with_workers(cli.workers, || commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<commands::Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
