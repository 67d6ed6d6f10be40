//! Flag and subcommand declarations.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trscore_core::engine::{PairwiseMode, ScoreMode};

#[derive(Parser, Debug)]
#[command(
    name = "trscore",
    version,
    about = "Reference-free readability scoring for ASR transcripts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score a candidate corpus against a reference corpus.
    Score(ScoreArgs),
    /// Per-sentence scores for paired reference/hypothesis corpora.
    Pairwise(PairwiseArgs),
    /// Punctuation precision/recall/F1 of a hypothesis against a reference.
    #[command(name = "punct-f1")]
    PunctF1(PunctArgs),
    /// Pearson correlation of two labeled value series.
    Correlate(CorrelateArgs),
    /// Aggregate human readability ratings.
    Hrs(HrsArgs),
    /// Apply perturbation jobs from a manifest to a clean corpus.
    Perturb(PerturbArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Ngram,
    Remote,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Flags shared by every command that scores text through a backend.
#[derive(Args, Debug)]
pub struct BackendFlags {
    /// Likelihood backend to score with.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,

    /// Completion endpoint URL (remote backend).
    #[arg(long)]
    pub endpoint: Option<String>,

    /// Model name sent to the endpoint (remote backend).
    #[arg(long)]
    pub model: Option<String>,

    /// Environment variable holding the bearer token (remote backend).
    #[arg(long)]
    pub token_env: Option<String>,

    /// N-gram order, 2 or 3 (ngram backend).
    #[arg(long)]
    pub order: Option<usize>,

    /// Add-k smoothing constant, k > 0 (ngram backend).
    #[arg(long)]
    pub smoothing_k: Option<f64>,

    /// Training corpus for the ngram backend; defaults to the reference.
    #[arg(long)]
    pub train: Option<PathBuf>,
}

/// Flags shared by every command that writes a report.
#[derive(Args, Debug)]
pub struct OutputFlags {
    /// Report format.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,

    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Optional TOML config mirroring the flags; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Reference corpus path.
    pub reference: PathBuf,
    /// Candidate corpus path.
    pub candidate: PathBuf,

    /// Corpus file layout: plain, lines, or jsonl.
    #[arg(long)]
    pub input_format: Option<String>,

    /// Aggregate per-sentence NLL as a sum or a per-token mean.
    #[arg(long)]
    pub mode: Option<ScoreMode>,

    /// Comma-separated percentile ranks to report.
    #[arg(long)]
    pub percentiles: Option<String>,

    #[command(flatten)]
    pub backend: BackendFlags,

    #[command(flatten)]
    pub output: OutputFlags,
}

#[derive(Args, Debug)]
pub struct PairwiseArgs {
    /// Reference corpus path.
    pub reference: PathBuf,
    /// Hypothesis corpus path, paired with the reference by position.
    pub hypothesis: PathBuf,

    /// Corpus file layout: plain, lines, or jsonl.
    #[arg(long)]
    pub input_format: Option<String>,

    /// Per-sentence comparison arithmetic.
    #[arg(long)]
    pub pairwise_mode: Option<PairwiseMode>,

    #[command(flatten)]
    pub backend: BackendFlags,

    #[command(flatten)]
    pub output: OutputFlags,
}

#[derive(Args, Debug)]
pub struct PunctArgs {
    /// Reference corpus path.
    pub reference: PathBuf,
    /// Hypothesis corpus path, paired with the reference by sentence id.
    pub hypothesis: PathBuf,

    /// Corpus file layout: plain, lines, or jsonl.
    #[arg(long)]
    pub input_format: Option<String>,

    /// Count '!' as a period instead of ignoring it.
    #[arg(long)]
    pub bang_as_period: bool,

    #[command(flatten)]
    pub output: OutputFlags,
}

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    /// CSV of label,value rows.
    pub series_a: PathBuf,
    /// CSV of label,value rows with the same label set.
    pub series_b: PathBuf,

    #[command(flatten)]
    pub output: OutputFlags,
}

#[derive(Args, Debug)]
pub struct HrsArgs {
    /// CSV of sentence_id,judge_id,rating rows.
    pub ratings: PathBuf,

    #[command(flatten)]
    pub output: OutputFlags,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    /// Clean input corpus path.
    pub input: PathBuf,

    /// TOML manifest listing perturbation jobs.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Directory receiving the perturbed corpora.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,

    /// Corpus file layout: plain, lines, or jsonl.
    #[arg(long)]
    pub input_format: Option<String>,

    /// Seed override applied to jobs that do not set one.
    #[arg(long)]
    pub seed: Option<u64>,

    #[command(flatten)]
    pub output: OutputFlags,
}
