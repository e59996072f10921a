use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hermit_core::model::Ablation;

#[derive(Debug, Parser)]
#[command(name = "hermit", version, about = "Hierarchical dialogue act, frame and argument tagger")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint, its history and a manifest.
    Train(TrainArgs),
    /// Tag raw text or a CoNLL file with a trained model.
    Tag(TagArgs),
    /// Score predictions against gold annotations.
    Eval(EvalArgs),
    /// Run k-fold cross-validation, or compare two finished runs.
    Crossval(CrossvalArgs),
    /// Convert NLU benchmark JSONL records to the four-column format.
    Convert(ConvertArgs),
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training corpus (four-column CoNLL).
    #[arg(long)]
    pub data: PathBuf,
    /// Development corpus; without it a fraction of --data is held out.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Fraction of --data held out for development when --dev is absent.
    #[arg(long, default_value_t = 0.1)]
    pub dev_fraction: f64,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_ablation, allow_hyphen_values = true)]
    pub ablation: Option<Ablation>,
    /// Precomputed sentence embeddings (HEMB binary or text).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Setting override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Suppress per-epoch progress on standard error.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TagFormat {
    /// One whitespace-tokenised sentence per line.
    Text,
    /// Four-column CoNLL with gold tags.
    Conll,
}

#[derive(Debug, Clone, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input file; standard input when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TagFormat::Text)]
    pub format: TagFormat,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Gold corpus (four-column CoNLL).
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions, four-column or seven-column as written by `tag`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory for report.txt and metrics.tsv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CrossvalArgs {
    #[arg(long, required_unless_present = "compare")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_ablation, allow_hyphen_values = true)]
    pub ablation: Option<Ablation>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// `next-fold`, or `fraction:F` to hold out a fraction of the training folds.
    #[arg(long, default_value = "next-fold")]
    pub protocol: String,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare two folds.tsv files with the signed-rank test.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "data")]
    pub compare: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub nlubm_in: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tag a final punctuation token O in the dialogue act and frame rows.
    #[arg(long)]
    pub strip_final_punct: bool,
}
