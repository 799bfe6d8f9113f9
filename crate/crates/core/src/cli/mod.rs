//! The `rutil` command line. Exit codes: 0 success, 1 domain or validation
//! failure, 2 IO, config, or usage failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::oracle::OracleError;

pub use config::{apply_override, Oracles, Paths, PoolSettings, Pools, RunConfig, Seeds};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) | CliError::Config(_) => 2,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Schema { .. } => CliError::Domain(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Transport { .. } | OracleError::Status { .. } => CliError::Io(e.to_string()),
            OracleError::Precondition(_) => CliError::Config(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rutil", version, about = "Rationale utility evaluation pipeline")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set exploration.interval_steps=100`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Upper bound on concurrent oracle requests.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Input record files. Each falls back to the config, then to the standard
/// file name inside the corpus directory.
#[derive(Debug, Clone, Default, Args)]
pub struct CorpusArgs {
    /// Directory with `<kind>.jsonl` files.
    #[arg(long, value_name = "DIR")]
    pub corpus_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub instances: Option<PathBuf>,
    /// Model outputs (predicted label and rationale).
    #[arg(long, value_name = "FILE")]
    pub outputs: Option<PathBuf>,
    /// Utility annotations.
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,
    /// Property annotations.
    #[arg(long, value_name = "FILE")]
    pub properties: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub gen_questions: Option<PathBuf>,
    /// Recorded oracle predictions for one model's rationales.
    #[arg(long, value_name = "FILE")]
    pub predictions: Option<PathBuf>,
    /// Generalization-question annotations.
    #[arg(long, value_name = "FILE")]
    pub gen_annotations: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and cross-check corpus files.
    Ingest(IngestArgs),
    /// Classify rationale utility and print the distribution.
    Utility(UtilityArgs),
    /// Krippendorff's alpha for answers and properties.
    Agreement(AgreementArgs),
    /// Association of utility with task accuracy and gold similarity.
    Correlate(CorrelateArgs),
    /// Mixed-effects model of utility on rationale properties.
    #[command(subcommand)]
    Glmm(GlmmCommand),
    /// Generalization questions.
    #[command(subcommand)]
    Genq(GenqCommand),
    /// GEN-U scoring.
    #[command(subcommand)]
    Genu(GenuCommand),
    /// Reward-binned training pool.
    #[command(subcommand)]
    Pool(PoolCommand),
    /// All analysis tables in one report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Write the validation report as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write normalized copies of the loaded files here.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UtilityArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Write classified pairs and the distribution as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GlmmCommand {
    /// Fit the model and print coefficient tables.
    Fit(GlmmFitArgs),
}

#[derive(Debug, Args)]
pub struct GlmmFitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// `majority` or `per_annotator`.
    #[arg(long, default_value = "majority")]
    pub aggregation: String,
    /// Grouping factors to include (question, model, human_prior); all by default.
    #[arg(long = "factor", value_name = "NAME")]
    pub factors: Vec<String>,
    /// Rows in the pairwise and best-combination tables.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenqCommand {
    /// Render generation prompts.
    Build(GenqBuildArgs),
    /// Parse logged completions into candidates.
    Parse(GenqParseArgs),
    /// Request completions from the generator and parse them.
    Generate(GenqGenerateArgs),
    /// Apply validator verdicts to candidates.
    Validate(GenqValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenqBuildArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// rephrase, counterfactual, similar_reasoning; all by default.
    #[arg(long = "gen-type", value_name = "TYPE")]
    pub gen_types: Vec<String>,
    /// Only this instance.
    #[arg(long)]
    pub instance_id: Option<String>,
    /// Write {instance_id, gen_type, prompt} lines.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenqParseArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Audit log written by `genq generate`.
    #[arg(long, value_name = "FILE")]
    pub audit: PathBuf,
    /// Candidate lines.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub rejects_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenqGenerateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long = "gen-type", value_name = "TYPE")]
    pub gen_types: Vec<String>,
    /// Sampling seed; falls back to `seeds.genq`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub audit_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenqValidateArgs {
    #[arg(long, value_name = "FILE")]
    pub candidates: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub verdicts: PathBuf,
    /// Accepted gen questions.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub rejections_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenuCommand {
    /// Score one model's rationales.
    Score(GenuScoreArgs),
    /// Theil's U of utility given GEN-U.
    Correlate(GenuCorrelateArgs),
}

#[derive(Debug, Args)]
pub struct GenuScoreArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub model_id: String,
    /// Query the configured oracles even when a predictions file is available.
    #[arg(long)]
    pub live: bool,
    /// Rationalization template whose question slot wraps oracle inputs.
    #[arg(long, value_name = "KIND")]
    pub template: Option<String>,
    /// Per-instance results, one JSON line each.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Every prediction used.
    #[arg(long, value_name = "FILE")]
    pub predictions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenuCorrelateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Results written by `genu score --out`.
    #[arg(long, value_name = "FILE")]
    pub genu: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PoolCommand {
    /// Map GEN-U scores to control tokens, or turn scored outputs into pool entries.
    Bin(PoolBinArgs),
    /// Run one exploration round.
    Explore(PoolExploreArgs),
    /// Write the conditioned training file.
    Emit(PoolEmitArgs),
}

#[derive(Debug, Args)]
pub struct PoolBinArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Print the control token for one score.
    #[arg(long, allow_hyphen_values = true)]
    pub score: Option<i64>,
    /// GEN-U results to bin; sample text is the scored model output.
    #[arg(long, value_name = "FILE")]
    pub genu: Option<PathBuf>,
    /// Render sample text with this template's target instead of the bare rationale.
    #[arg(long, value_name = "KIND")]
    pub template: Option<String>,
    /// Step recorded on the new entries.
    #[arg(long, default_value_t = 0)]
    pub step: u64,
    /// Pool file to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoolExploreArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Existing pool; a new pool starts empty.
    #[arg(long, value_name = "FILE")]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub step: u64,
    /// Explore even when the step is not due.
    #[arg(long)]
    pub force: bool,
    /// Falls back to `seeds.exploration`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "KIND")]
    pub template: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoolEmitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub pool: PathBuf,
    #[arg(long, value_name = "KIND")]
    pub template: Option<String>,
    /// Keep one bin: pos, zero, neg, 1, 0, -1, or a control token.
    #[arg(long, allow_hyphen_values = true)]
    pub filter: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Include GEN-U for this model when predictions are available.
    #[arg(long)]
    pub model_id: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    match commands::dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
