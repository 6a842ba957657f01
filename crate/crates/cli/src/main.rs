mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "pota", version, about = "Pseudo-labeling with consistency-aware adaptive optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one CAOT problem and write the plan, marginal, trace and labels.
    Solve(SolveArgs),
    /// Train the heads end to end and report per-epoch statistics.
    Pipeline(RunArgs),
    /// Compare prediction, AOT and CAOT pseudo-labels on a trained state.
    Bench(BenchArgs),
    /// Score predicted labels against ground truth (ACC and NMI).
    Eval(EvalArgs),
    /// Write a synthetic dataset to disk.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct SolveArgs {
    /// N x K probability matrix (CSV or binary embedding format).
    #[arg(long)]
    pub probs: PathBuf,
    /// N x N similarity matrix; defaults to the cosine similarity of the rows.
    #[arg(long)]
    pub similarity: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub eps1: f64,
    #[arg(long, default_value_t = 100.0)]
    pub eps2: f64,
    #[arg(long, default_value_t = 25.0)]
    pub eps3: f64,
    #[arg(long, default_value_t = 10)]
    pub t1: usize,
    #[arg(long, default_value_t = 10)]
    pub t2: usize,
    #[arg(long, default_value_t = 10)]
    pub newton_iters: usize,
    /// Seed for a random initial cluster marginal; uniform when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DataArgs {
    /// Anchor embeddings (CSV or binary).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// First augmented view; defaults to the anchors.
    #[arg(long)]
    pub view1: Option<PathBuf>,
    /// Second augmented view; defaults to the anchors.
    #[arg(long)]
    pub view2: Option<PathBuf>,
    /// Ground-truth labels, one per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Number of clusters (inferred from --labels when omitted).
    #[arg(long)]
    pub k: Option<usize>,
    /// Synthetic data instead of files, e.g. "k=5,sizes=100x5,dim=16,sep=8,noise=0.5,seed=1".
    #[arg(long, conflicts_with = "embeddings")]
    pub synth: Option<String>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra key=value assignments applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of consecutive seeds (synthetic data and training).
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Write the metrics as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EmbeddingFormat {
    Csv,
    Bin,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: String,
    #[arg(long, value_enum, default_value_t = EmbeddingFormat::Csv)]
    pub format: EmbeddingFormat,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Pipeline(a) => commands::pipeline(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
