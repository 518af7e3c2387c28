//! `injectbench`: command-line driver for the knowledge-injection
//! evaluation harness.
//!
//! Exit codes: 0 on success, 1 on validation errors, 2 on model service
//! errors.

mod commands;
mod manifest;
mod services;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use injectbench_core::corpus::Topic;
use injectbench_core::modelio::ServiceError;

#[derive(Debug, Parser)]
#[command(name = "injectbench", version, about = "Knowledge-injection evaluation harness")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Experiment manifest (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the manifest.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replace every model endpoint with a deterministic mock.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Worker threads; overrides the manifest.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output root (for `report`, the report directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Extra endpoint `name=url:capability`; repeatable.
    #[arg(long = "endpoint", global = true)]
    pub endpoints: Vec<String>,
}

/// Overrides for how answer options are scored.
#[derive(Args, Debug, Clone, Copy, Default)]
pub struct ScoringArgs {
    /// Score the whole prompt plus option instead of the option alone.
    #[arg(long)]
    pub full_sequence: bool,
    /// Divide each score by the number of tokens summed.
    #[arg(long)]
    pub per_token_mean: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean raw articles into chunks.
    Ingest {
        /// Raw articles (JSONL); defaults to the manifest's `articles`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Topic for articles that carry none.
        #[arg(long)]
        topic: Option<Topic>,
        /// Sections shorter than this many tokens are dropped.
        #[arg(long)]
        min_tokens: Option<usize>,
    },
    /// Embed chunks and write the vector index.
    Index,
    /// Print index entries: id, norm, leading components.
    Dump {
        /// Index file; defaults to the one under `<out>/index`.
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Generate candidate questions per chunk for review.
    GenQuestions {
        /// Only the first N eligible chunks.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Generate paraphrases per chunk.
    GenParaphrases {
        /// Paraphrases per chunk.
        #[arg(long)]
        n: Option<usize>,
        /// Emit the sampled hyperparameter-validation split instead.
        #[arg(long)]
        validation: bool,
        /// Chunks in the validation split.
        #[arg(long)]
        count: Option<usize>,
        /// Only the first N chunks.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// List generated question sets, record decisions, export approved.
    Review {
        /// Chunk ids whose sets are approved.
        #[arg(long, num_args = 1..)]
        approve: Vec<String>,
        /// Chunk ids whose sets are rejected.
        #[arg(long, num_args = 1..)]
        reject: Vec<String>,
        /// Write the selected questions of approved sets.
        #[arg(long)]
        export: bool,
    },
    /// Write fine-tuning datasets and training configs.
    PrepFt {
        /// Paraphrase counts, e.g. `0..10` or `0,2,5`.
        #[arg(long, default_value = "0..10")]
        n_paraphrases: String,
        /// Written into every training config.
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        batch_size: Option<u32>,
        /// Tokens per training block.
        #[arg(long)]
        block_size: Option<usize>,
    },
    /// Run the base / RAG / fine-tuned / fine-tuned + RAG grid.
    Evaluate {
        /// Print the resolved grid without calling any service.
        #[arg(long)]
        dry_run: bool,
        /// Skip questions already answered in existing journals.
        #[arg(long)]
        resume: bool,
        /// Retrieved documents for RAG cells; 0 disables retrieval.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Sweep the number of retrieved documents for one model.
    Ablate {
        /// Values of K, e.g. `0..5`.
        #[arg(long, default_value = "0..5")]
        k: String,
        /// Model display name; defaults to the first model.
        #[arg(long)]
        model: Option<String>,
        /// Variant label of that model.
        #[arg(long, default_value = "base")]
        variant: String,
        /// Few-shot exemplars per prompt.
        #[arg(long, default_value_t = 0)]
        shots: usize,
        /// Task; defaults to the first task among the questions.
        #[arg(long)]
        task: Option<Topic>,
        /// Print the sweep without calling any service.
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Render journals into tables.
    Report {
        /// Journal directory; defaults to `<out>/journals`.
        #[arg(long)]
        journals: Option<PathBuf>,
        /// md, csv or plot-data; repeatable.
        #[arg(long = "format", default_value = "md")]
        formats: Vec<String>,
        /// Columns per approach or per K.
        #[arg(long, default_value = "approach")]
        columns: String,
        /// Column gains are measured against.
        #[arg(long, default_value = "Base model")]
        base_column: String,
    },
}

/// A run finished but some model calls failed; maps to exit code 2.
#[derive(Debug)]
pub struct ServiceFailure(pub String);

impl std::fmt::Display for ServiceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ServiceFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ServiceFailure>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<injectbench_core::Error>() {
            return if e.is_service() { 2 } else { 1 };
        }
        if let Some(e) = cause.downcast_ref::<ServiceError>() {
            return match e {
                ServiceError::InvalidRequest(_) | ServiceError::Capability { .. } => 1,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
