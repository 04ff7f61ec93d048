use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use veracity_core::explain::Target;
use veracity_core::linguistics::report::DEFAULT_ALPHA;
use veracity_core::model::Architecture;

#[derive(Debug, Parser)]
#[command(name = "veracity", version, about = "Train, evaluate and explain statement-pair deception classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated stratified cross-validation; resumes from an existing ledger.
    Train(TrainArgs),
    /// Scores a checkpoint on a labeled file.
    Evaluate(EvaluateArgs),
    /// Writes token attributions for selected documents.
    Explain(ExplainArgs),
    /// Lexicon correlations, vocabulary overlap and text statistics.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Labeled corpus (CSV, or JSON lines for .jsonl/.json/.ndjson).
    #[arg(long)]
    pub data: PathBuf,
    /// Read single-text records (id, text, label) and split each text in half.
    #[arg(long)]
    pub open_domain: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Experiment config (JSON with "model" and "train" sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_arch)]
    pub arch: Option<Architecture>,
    /// Category dictionary; required for coatt_liwc.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Precomputed statement encodings used instead of the internal encoder.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Document to explain; repeat for several.
    #[arg(long = "doc-id", required = true)]
    pub doc_ids: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "both", value_parser = parse_target)]
    pub target: Target,
    #[arg(long, default_value_t = veracity_core::explain::lime::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Category dictionary used to compute features.
    #[arg(long, conflicts_with = "features")]
    pub dict: Option<PathBuf>,
    /// Precomputed per-document features (CSV with a doc_id column).
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e: veracity_core::Error| e.to_string())
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse().map_err(|e: veracity_core::Error| e.to_string())
}
