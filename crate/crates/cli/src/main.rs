//! `cmgkit`: dataset mining and curation, extraction and generation
//! evaluation, staged training and grounding analysis.

mod commands;
mod config;
mod errors;
mod files;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{Layer, Settings};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "cmgkit", version, about = "Commit-issue dataset and evaluation toolkit")]
struct Cli {
    /// TOML file with defaults for seed, token_limit, english_ratio, tau,
    /// parallelism, sequential, bins and token_env.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run batch work on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    /// Upper bound on concurrent network requests.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum TaggerKind {
    /// Keyword-trigger baseline.
    Lexical,
    /// Replays the gold spans; a harness sanity check.
    Gold,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum StateSourceArg {
    Gold,
    Extracted,
    GoldThenExtracted,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build commit→issue links and fetch the linked records.
    Mine(MineArgs),
    /// Replace URLs, code and issue references with placeholder tokens.
    Normalize(NormalizeArgs),
    /// Drop bot, trivial, non-English, over-long and unlinked records.
    Filter(FilterArgs),
    /// Seeded 8:1:1 train/valid/test split.
    Split(SplitArgs),
    /// Check records and annotations against the schema.
    AnnotateValidate(ValidateArgs),
    /// Score predicted state spans against gold annotations.
    EvalExtraction(EvalExtractionArgs),
    /// Score generated messages with BLEU, ROUGE-L, METEOR and CIDEr.
    EvalGeneration(EvalGenerationArgs),
    /// Ground and fine-tune the retrieval generator, then generate for the test split.
    RunPipeline(RunPipelineArgs),
    /// Compare code/message distances before and after grounding.
    GroundAnalyze(GroundAnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Repository as owner/name.
    #[arg(long)]
    pub repo: String,
    /// Issue numbers, one per line.
    #[arg(long)]
    pub issues: PathBuf,
    /// Replay recorded responses instead of calling the API.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Records as JSONL.
    #[arg(long)]
    pub out: PathBuf,
    /// Commit→issue map as JSON.
    #[arg(long)]
    pub map_out: Option<PathBuf>,
    /// JSONL of finished issues; rerunning resumes from it.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Environment variable holding the API token.
    #[arg(long)]
    pub token_env: Option<String>,
    /// Requests per second when talking to the live API.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    /// Records as JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Normalized records as JSONL.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Records as JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Kept records as JSONL.
    #[arg(long)]
    pub out: PathBuf,
    /// One JSON line per dropped record with its index and reason.
    #[arg(long)]
    pub reasons: Option<PathBuf>,
    /// Maximum tokens per text field (default 1024).
    #[arg(long)]
    pub token_limit: Option<usize>,
    /// Minimum share of ASCII letters among all letters (default 0.9).
    #[arg(long)]
    pub english_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Records as JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Receives train.jsonl, valid.jsonl and test.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Shuffle and training seed; required here, in the config file or in CMGKIT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Records as JSONL, annotated or not.
    #[arg(long)]
    pub input: PathBuf,
    /// Also require at least one linked issue per record.
    #[arg(long)]
    pub curated: bool,
    /// Violations as JSONL; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalExtractionArgs {
    /// Annotated records.
    #[arg(long)]
    pub gold: PathBuf,
    /// Annotated predictions aligned record-by-record with the gold file.
    #[arg(long, conflicts_with = "tagger", required_unless_present = "tagger")]
    pub pred: Option<PathBuf>,
    /// Extract predictions with a built-in tagger instead.
    #[arg(long, value_enum)]
    pub tagger: Option<TaggerKind>,
    /// Fuzzy-match threshold in (0, 1] (default 0.8).
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalGenerationArgs {
    /// Hypotheses, one per line.
    #[arg(long, requires = "reference", conflicts_with = "input")]
    pub hyp: Option<PathBuf>,
    /// References, one per line.
    #[arg(long = "ref", id = "reference", requires = "hyp")]
    pub reference: Option<PathBuf>,
    /// JSONL with "hypothesis" and "reference" on every line.
    #[arg(long, required_unless_present = "hyp")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_n: usize,
    #[arg(long, default_value_t = cmgkit_core::metrics::DEFAULT_BETA)]
    pub beta: f64,
    /// Plain sentence BLEU without add-epsilon smoothing.
    #[arg(long)]
    pub no_smoothing: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunPipelineArgs {
    /// Records to split 8:1:1 with the seed.
    #[arg(long)]
    pub input: PathBuf,
    /// Receives provenance.json, generations.jsonl and checkpoints/.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Shuffle and training seed; required here, in the config file or in CMGKIT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = StateSourceArg::GoldThenExtracted)]
    pub state_source: StateSourceArg,
    /// Tagger for issues without gold annotations.
    #[arg(long, value_enum)]
    pub tagger: Option<TaggerKind>,
    /// Fine-tune only.
    #[arg(long)]
    pub skip_grounding: bool,
    /// Also train an ungrounded model and write before.emb and after.emb
    /// for the test split into this directory.
    #[arg(long)]
    pub emit_embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GroundAnalyzeArgs {
    /// Embeddings from the model trained without grounding.
    #[arg(long)]
    pub before: PathBuf,
    /// Embeddings from the grounded model.
    #[arg(long)]
    pub after: PathBuf,
    /// JSON report {u, p_value, n, medians}; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Histogram CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Histogram bins per sample (default 20).
    #[arg(long)]
    pub bins: Option<usize>,
}

fn settings(cli: &Cli, flags: Layer) -> anyhow::Result<Settings> {
    let file = cli.config.as_deref().map(Layer::from_file).transpose()?;
    let flags = Layer {
        sequential: cli.sequential.then_some(true),
        parallelism: cli.parallelism,
        ..flags
    };
    Ok(Settings::new(flags, file, Layer::from_env()?))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    use Command::*;
    match &cli.command {
        Mine(a) => {
            let s = settings(&cli, Layer { token_env: a.token_env.clone(), ..Layer::default() })?;
            commands::data::mine(a, &s)
        }
        Normalize(a) => commands::data::normalize(a, &settings(&cli, Layer::default())?),
        Filter(a) => {
            let flags = Layer {
                token_limit: a.token_limit,
                english_ratio: a.english_ratio,
                ..Layer::default()
            };
            commands::data::filter(a, &settings(&cli, flags)?)
        }
        Split(a) => commands::data::split(a, &settings(&cli, Layer { seed: a.seed, ..Layer::default() })?),
        AnnotateValidate(a) => commands::data::validate(a),
        EvalExtraction(a) => {
            commands::eval::extraction(a, &settings(&cli, Layer { tau: a.tau, ..Layer::default() })?)
        }
        EvalGeneration(a) => commands::eval::generation(a, &settings(&cli, Layer::default())?),
        RunPipeline(a) => {
            commands::train::run_pipeline(a, &settings(&cli, Layer { seed: a.seed, ..Layer::default() })?)
        }
        GroundAnalyze(a) => {
            commands::train::ground_analyze(a, &settings(&cli, Layer { bins: a.bins, ..Layer::default() })?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(errors::exit_code(&e))
        }
    }
}
