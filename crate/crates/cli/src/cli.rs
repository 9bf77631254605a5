use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "uplift",
    version,
    about = "Multi-treatment uplift modeling: data, training, evaluation, benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test pair with a JSON sidecar.
    Gen(GenArgs),
    /// Train a model on a dataset CSV.
    Train(TrainArgs),
    /// Score a model (or the true response surface) with the mean Qini.
    Eval(EvalArgs),
    /// Run a seeded experiment matrix and emit tables.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// rct, rct_noise, rct_nm, obs or mix.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub with_iv: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_test: usize,
    /// Output directory for train.csv, test.csv and spec.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// slearner, bnn, tarnet (cfrnet) or drcfr.
    #[arg(long, default_value = "tarnet")]
    pub backbone: String,
    /// fa, sa or ofa.
    #[arg(long, default_value = "sa")]
    pub head: String,
    /// none, mmd or wass.
    #[arg(long, default_value = "none")]
    pub disc: String,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// OFA polynomial degree (default: arms − 1).
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Output directory for model.json and history.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Test CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Model artifact; not needed with --use-truth.
    #[arg(long, required_unless_present = "use_truth")]
    pub model: Option<PathBuf>,
    /// Score the true response probabilities stored in the CSV.
    #[arg(long)]
    pub use_truth: bool,
    /// Permute score rows before ranking (null baseline).
    #[arg(long)]
    pub shuffle_scores: bool,
    /// Seed for --shuffle-scores.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub control: usize,
    /// Output directory for report.json and per-arm curve CSVs.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replace the scenario list with one scenario.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub with_iv: bool,
    /// Replace the seed list (repeatable).
    #[arg(long)]
    pub seed: Vec<u64>,
    /// With --head, replace the model list with one model.
    #[arg(long, requires = "head")]
    pub backbone: Option<String>,
    #[arg(long, requires = "backbone")]
    pub head: Option<String>,
    #[arg(long)]
    pub disc: Option<String>,
    /// Replace the λ2 grid with one value.
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Concurrent runs.
    #[arg(long, env = "UPLIFT_BENCH_WORKERS", default_value_t = 1)]
    pub workers: usize,
}
