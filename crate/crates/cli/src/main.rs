//! `rubik` — knowledge-base lifecycle, profiling, mining, indexing, SQL
//! generation, evaluation, and curation from one binary.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error.

mod commands;
mod context;
mod io;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rubik", version, about = "Knowledge-centric NL2SQL toolkit")]
struct Cli {
    /// Config file (TOML). Falls back to $RUBIK_CONFIG, then defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format for machine-readable commands.
    #[arg(long, global = true, default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Commands {
    /// Answer a question end-to-end: retrieve, generate (with TTS), refine,
    /// preview the result, and emit a retrieval trace.
    Ask(AskArgs),
    /// Retrieve and generate only; prints the SQL candidate.
    Gen(AskArgs),
    /// Mine a batch of queries (labeled and unlabeled) and merge the results
    /// into the knowledge base.
    Update(UpdateArgs),
    /// Knowledge-base lifecycle.
    #[command(subcommand)]
    Kb(KbCmd),
    /// Retrieval indices.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Database profiling.
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Execution-result evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Context mining over NL(-SQL) batches.
    #[command(subcommand)]
    Mine(MineCmd),
    /// Distillation-data curation.
    #[command(subcommand)]
    Curate(CurateCmd),
}

#[derive(Args)]
struct AskArgs {
    /// The natural-language question.
    #[arg(long)]
    query: String,
    /// Query context as a JSON object (user profile, query time, ...).
    #[arg(long)]
    context: Option<String>,
    /// Print the assembled prompt instead of calling the model.
    #[arg(long)]
    dry_run: bool,
    /// Directory of digest->response fixture files (<role>.json) replayed
    /// instead of the configured clients.
    #[arg(long)]
    mock_fixtures: Option<PathBuf>,
}

#[derive(Args)]
struct UpdateArgs {
    /// JSONL batch: {"nl": ..., "sql": optional, "context": optional}.
    #[arg(long = "in")]
    input: PathBuf,
    /// Tool budget per unlabeled query.
    #[arg(long, default_value_t = 8)]
    budget: usize,
}

#[derive(Subcommand)]
enum KbCmd {
    /// Import UKF documents (a file or a directory of .json files).
    Import {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "mined")]
        trust: String,
    },
    /// Merge mined UKF documents through the four-rule policy.
    Merge {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Mark expired records inactive.
    Sweep {
        /// Override "now" (RFC 3339).
        #[arg(long)]
        now: Option<String>,
    },
    /// Print one record by id.
    Get {
        #[arg(long)]
        id: String,
    },
}

#[derive(Subcommand)]
enum IndexCmd {
    /// Compile the string index and write its binary serialization.
    BuildDaac {
        #[arg(long)]
        out: PathBuf,
    },
    /// Match a query against the string index.
    Match {
        #[arg(long)]
        query: String,
        /// Load a previously serialized index instead of rebuilding.
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Filter records by tag slots (SLOT=PATTERN, '%' wildcard).
    FacetQuery {
        #[arg(long = "filter")]
        filters: Vec<String>,
        #[arg(long)]
        strict: bool,
    },
    /// Search the multi-vector index.
    VectorSearch {
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        mmr: bool,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Few-hop graph search over relation tuples.
    Graph {
        #[arg(long)]
        start: String,
        #[arg(long = "relation")]
        relations: Vec<String>,
        #[arg(long, default_value_t = 1)]
        hops: usize,
    },
}

#[derive(Subcommand)]
enum ProfileCmd {
    /// Profile every table and export Table/Column records.
    Db {
        #[arg(long)]
        conn: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Consult the configured LLM for descriptions and time formats.
        #[arg(long)]
        use_llm: bool,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Score predicted SQLs against gold SQLs by execution.
    Bfbeta {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        conn: Option<String>,
        #[arg(long)]
        beta: Option<f64>,
        /// CSV report path (columns: id, ex, bfbeta, error).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

#[derive(Subcommand)]
enum MineCmd {
    /// Mine labeled NL-SQL pairs: {"nl": ..., "sql": ...} per line.
    Labeled {
        #[arg(long = "in")]
        input: PathBuf,
        /// Merge verified entries into the knowledge base.
        #[arg(long)]
        merge: bool,
    },
    /// Mine unlabeled queries: {"nl": ...} per line.
    Unlabeled {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long)]
        merge: bool,
    },
}

#[derive(Subcommand)]
enum CurateCmd {
    /// Score NL-CoT-SQL tuples: hardness, judge quality, diversity.
    Score {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the top-budget tuples by total score.
    Select {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose seed pairs through a CTE template.
    Synthesize {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        template: String,
        /// Indicator JSON: {"name", "expr", "inputs"}.
        #[arg(long)]
        indicator: Option<String>,
        /// Ontology JSON file: {"groups": {group: [predicates]}}.
        #[arg(long)]
        ontology: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Transfer pairs onto the configured database.
    Transfer {
        #[arg(long = "in")]
        input: PathBuf,
        /// Target schema description (inline text or @file).
        #[arg(long)]
        schema: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, message) = match e {
                commands::CmdError::Usage(m) => (2u8, m),
                commands::CmdError::Failed(m) => (1u8, m),
            };
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), commands::CmdError> {
    let ctx = context::CliContext::load(cli.config.as_deref(), cli.format)?;
    match cli.command {
        Commands::Ask(args) => commands::ask(&ctx, &args, true),
        Commands::Gen(args) => commands::ask(&ctx, &args, false),
        Commands::Update(args) => commands::update(&ctx, &args),
        Commands::Kb(cmd) => commands::kb(&ctx, cmd),
        Commands::Index(cmd) => commands::index(&ctx, cmd),
        Commands::Profile(cmd) => commands::profile(&ctx, cmd),
        Commands::Eval(cmd) => commands::eval(&ctx, cmd),
        Commands::Mine(cmd) => commands::mine(&ctx, cmd),
        Commands::Curate(cmd) => commands::curate(&ctx, cmd),
    }
}
