//! `visrag`: ingest image-bearing document bundles, build fused vector
//! indexes, query them, and run method-vs-method evaluations.
//!
//! Exit codes: 0 success, 2 usage or validation problem, 3 provider
//! failure, 4 data mismatch (wrong dimensions, corrupt or incompatible
//! index files, mismatched corpora).

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use visrag_core::bundle::BundleError;
use visrag_core::eval::EvalError;
use visrag_core::index::IndexError;
use visrag_core::providers::ProviderError;
use visrag_core::scoring::ScoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Provider(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::DimensionMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Provider(e.to_string()),
        }
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::Provider(inner) => CliError::from(inner),
            IndexError::DimMismatch { .. }
            | IndexError::ChecksumMismatch
            | IndexError::FormatVersionMismatch { .. } => CliError::Data(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::Provider(inner) => CliError::from(inner),
            ScoreError::MissingComponent(_) => CliError::Data(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Provider(inner) => CliError::from(inner),
            EvalError::Index(inner) => CliError::from(inner),
            EvalError::Score(inner) => CliError::from(inner),
            EvalError::CorpusMismatch { .. } => CliError::Data(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "visrag",
    version,
    about = "Multimodal retrieval over image-bearing document bundles"
)]
struct Cli {
    /// JSON config file; VISRAG_CONFIG is used when the flag is absent.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate all bundles in a corpus and write corpus.lock.json
    Ingest {
        /// Corpus directory (one bundle subdirectory per document)
        corpus_dir: Option<PathBuf>,
        /// Lock file destination (default: <corpus>/corpus.lock.json)
        #[arg(short, long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Build and persist a fused vector index for one weight scheme
    Index {
        corpus_dir: Option<PathBuf>,
        /// Weight scheme name (preset or defined in the config file)
        #[arg(long)]
        scheme: String,
        /// Index file destination (default: <index_dir>/<scheme>.jsonl)
        #[arg(short, long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run one question against a persisted index
    Query {
        index_path: PathBuf,
        question: String,
        /// Number of candidates to retrieve before dedup and rerank
        #[arg(short)]
        k: Option<usize>,
        /// Emit machine-readable JSON instead of the text listing
        #[arg(long)]
        json: bool,
    },
    /// Evaluate retrieval methods over a corpus and a query set
    Eval {
        corpus_dir: Option<PathBuf>,
        /// Query set (JSONL, one {"qid","question"} per line)
        #[arg(long, value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Comma-separated scheme names (default: schemes from config)
        #[arg(long, value_delimiter = ',', value_name = "NAMES")]
        methods: Vec<String>,
        /// Output directory for runs, summaries, and reports
        #[arg(short, long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Skip retrieval and aggregate a qid-by-method score table instead
        #[arg(long, value_name = "CSV")]
        from_scores: Option<PathBuf>,
    },
    /// Re-render a report from stored run files
    Report {
        run_dir: PathBuf,
        /// Output format: md or csv
        #[arg(long, default_value = "md")]
        format: String,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = config::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { corpus_dir, out } => {
            let corpus = corpus_dir.unwrap_or_else(|| config.paths.corpus_dir.clone());
            commands::ingest(&corpus, out.as_deref())
        }
        Command::Index {
            corpus_dir,
            scheme,
            out,
        } => {
            let corpus = corpus_dir.unwrap_or_else(|| config.paths.corpus_dir.clone());
            let out = out.unwrap_or_else(|| config.paths.index_dir.join(format!("{scheme}.jsonl")));
            commands::index(&config, &corpus, &scheme, &out)
        }
        Command::Query {
            index_path,
            question,
            k,
            json,
        } => commands::query(&config, &index_path, &question, k, json),
        Command::Eval {
            corpus_dir,
            queries,
            methods,
            out,
            from_scores,
        } => {
            let corpus = corpus_dir.unwrap_or_else(|| config.paths.corpus_dir.clone());
            let out = out.unwrap_or_else(|| config.paths.report_dir.clone());
            commands::eval(
                &config,
                &corpus,
                queries.as_deref(),
                &methods,
                &out,
                from_scores.as_deref(),
            )
        }
        Command::Report { run_dir, format } => commands::report(&run_dir, &format),
    }
}
