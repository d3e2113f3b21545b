//! Batch front-end: argument parsing, provider resolution and exit codes.
//!
//! Exit codes: 0 success, 2 configuration, usage or provider error, 3 data error,
//! 4 internal numerical error.

mod commands;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::probe::FeatureMode;

pub use commands::run;

pub const ENDPOINT_ENV: &str = "ADIEE_ENDPOINT";

#[derive(Debug, Parser)]
#[command(name = "adiee", version, about = "Score-label synthesis and evaluation for instruction-guided image editing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Percentile CLIP-I / DINO-I thresholds over a synthetic manifest.
    Thresholds(ThresholdsArgs),
    /// Label candidates produced by editing methods.
    LabelSynthetic(LabelSyntheticArgs),
    /// Label images of multi-turn edit sequences.
    LabelMultiturn(LabelMultiturnArgs),
    /// Render labeled records into question/answer training lines.
    Build(BuildArgs),
    /// Train the probe scorer on labeled records.
    TrainProbe(TrainProbeArgs),
    /// Score records or manifest samples with a trained probe.
    Score(ScoreArgs),
    /// Per-method Spearman against human ratings, Fisher-averaged.
    EvalPointwise(EvalPointwiseArgs),
    /// Pairwise preference accuracy with a tie class.
    EvalPairwise(EvalPairwiseArgs),
    /// Rank models by average score.
    Rank(RankArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProviderArgs {
    /// Embedding store. A bare PATH serves CLIP and DINO lookups;
    /// `clip=PATH` and `dino=PATH` set each space separately.
    #[arg(long = "store", value_name = "[SPACE=]PATH")]
    pub stores: Vec<String>,
    /// Embedding service base URL (falls back to $ADIEE_ENDPOINT when no store is given).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Retries per remote request.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LabelerArgs {
    #[arg(long, default_value_t = 5.0)]
    pub percentile: f64,
    #[arg(long = "tau-clip-d", default_value_t = 0.2, allow_negative_numbers = true)]
    pub tau_clip_d: f64,
    /// Comma-separated override of the always-negative method bucket.
    #[arg(long, value_delimiter = ',')]
    pub negative_methods: Option<Vec<String>>,
    /// Comma-separated override of the positive method bucket.
    #[arg(long, value_delimiter = ',')]
    pub positive_methods: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub labeler: LabelerArgs,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LabelSyntheticArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub labeler: LabelerArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Abort on the first per-sample error.
    #[arg(long)]
    pub strict: bool,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write per-sample errors (stderr when omitted).
    #[serde(skip)]
    #[arg(long)]
    pub errors: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LabelMultiturnArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// (j1, j2) pairs sampled per sequence.
    #[arg(long, default_value_t = 1)]
    pub pairs: usize,
    #[command(flatten)]
    pub run: RunArgs,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildArgs {
    /// Labeled record files, concatenated in the order given.
    #[arg(long = "records", required = true)]
    pub records: Vec<PathBuf>,
    /// JSON template bank override.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum FeatureModeArg {
    SimsOnly,
    SimsPlusDiffs,
}

impl From<FeatureModeArg> for FeatureMode {
    fn from(m: FeatureModeArg) -> Self {
        match m {
            FeatureModeArg::SimsOnly => FeatureMode::SimsOnly,
            FeatureModeArg::SimsPlusDiffs => FeatureMode::SimsPlusDiffs,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainProbeArgs {
    #[arg(long = "records", required = true)]
    pub records: Vec<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FeatureModeArg::SimsOnly)]
    pub feature_mode: FeatureModeArg,
    #[arg(long, default_value_t = 32)]
    pub hidden_width: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = crate::probe::DEFAULT_LAMBDA_SCORE)]
    pub lambda_score: f64,
    /// Parameter file to write.
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-epoch loss log (one JSON object per epoch).
    #[serde(skip)]
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// Labeled records to score.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub records: Option<PathBuf>,
    /// Synthetic manifest to score.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Jsonl)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalPointwiseArgs {
    /// Point-wise benchmark samples.
    #[arg(long)]
    pub input: PathBuf,
    /// Score file whose entries replace `model_score` by matching id.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Jsonl)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalPairwiseArgs {
    /// Pair-wise benchmark samples.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "tie-epsilon", default_value_t = 0.0)]
    pub tie_epsilon: f64,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Jsonl)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RankArgs {
    /// Per-output scores, one `{"method", "score"}` object per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Reference ranking, one `{"method", "rank"}` object per line.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Jsonl)]
    pub format: ReportFormat,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io { .. } | Error::ProviderUnavailable { .. } => 2,
        Error::Numerical(_) => 4,
        _ => 3,
    }
}
