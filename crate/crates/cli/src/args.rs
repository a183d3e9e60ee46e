use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "factoid", version, about = "Forge factual-entailment pairs and score hallucination detectors")]
pub struct Cli {
    /// TOML config file with [forge], [provider] and [hvi] sections
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads [default: 1]
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Forge a labelled corpus from seed sentences
    Forge(ForgeArgs),
    /// Run the paraphrase gate over candidate sets
    Gate(GateArgs),
    /// Compare paraphrasers on coverage, correctness and diversity
    EvalParaphrasers(EvalParaphrasersArgs),
    /// Score an LLM cohort's hallucination vulnerability
    Hvi(HviArgs),
    /// Count positive and negative pairs per category
    Stats(StatsArgs),
    /// Score entailment predictions or compare detectors
    #[command(subcommand)]
    FeEval(FeEvalCommand),
    /// Query an embedding table for neighbors
    Embed(EmbedArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    #[value(alias = "table")]
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntailmentSource {
    /// Offline token-overlap judge
    Stub,
    /// Ask the configured provider
    Provider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Nearest,
    Farthest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BnModeArg {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    /// Spread of each category's counts across the cohort
    CategoryCounts,
    /// Spread of the first-pass scores
    InitialHvi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    Person,
    Location,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    All,
    Refute,
    Both,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Answer oracle calls from a fixture file or directory instead of the network
    #[arg(long, value_name = "PATH")]
    pub replay: Option<PathBuf>,

    /// Chat-completions base URL [env: FACTOID_API_BASE] [default: http://localhost:8000/v1]
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,

    /// Model name sent with each request [default: gpt-3.5-turbo]
    #[arg(long)]
    pub model: Option<String>,

    /// Disk cache directory for provider responses
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Write every request and response seen to a fixture file
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,

    /// Concurrent requests [default: 4]
    #[arg(long, value_name = "N")]
    pub max_in_flight: Option<usize>,

    /// Retries after a failed request [default: 3]
    #[arg(long, value_name = "N")]
    pub retry_budget: Option<u32>,

    /// Client-side rate limit
    #[arg(long, value_name = "RPS")]
    pub requests_per_second: Option<f64>,

    /// Per-request timeout [default: 60]
    #[arg(long, value_name = "SECS")]
    pub timeout_secs: Option<u64>,

    /// Entailment judge
    #[arg(long, value_enum, default_value_t = EntailmentSource::Stub)]
    pub entailment: EntailmentSource,
}

#[derive(Debug, Args)]
pub struct ForgeArgs {
    /// Seed sentences, JSONL
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Output corpus; stdout if absent
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Only forge seeds of these categories (bn, ti, if, p)
    #[arg(long, value_delimiter = ',')]
    pub category: Vec<String>,

    /// Write skipped seeds and reasons here, JSONL
    #[arg(long, value_name = "FILE")]
    pub skips: Option<PathBuf>,

    /// Accept every temporal plan without prompting
    #[arg(long)]
    pub auto_accept: bool,

    /// word2vec text table for entity swaps
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,

    /// token<TAB>class sidecar; also enables offline NER
    #[arg(long, value_name = "FILE")]
    pub gazetteer: Option<PathBuf>,

    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number perturbation mode [default: relative]
    #[arg(long, value_enum)]
    pub bn_mode: Option<BnModeArg>,

    /// Relative perturbation half-width [default: 0.2]
    #[arg(long)]
    pub bn_fraction: Option<f64>,

    /// Absolute perturbation half-width
    #[arg(long)]
    pub bn_delta: Option<f64>,

    /// Paraphrases requested per variant [default: 5]
    #[arg(long, value_name = "N")]
    pub paraphrases: Option<usize>,

    /// Entity replacements per seed [default: 5]
    #[arg(long, value_name = "N")]
    pub variants: Option<usize>,

    /// Smallest temporal offset in years [default: 50]
    #[arg(long)]
    pub ti_offset_min: Option<i64>,

    /// Largest temporal offset in years [default: 150]
    #[arg(long)]
    pub ti_offset_max: Option<i64>,

    /// Latest year accepted from an answer [default: current year]
    #[arg(long)]
    pub ti_max_year: Option<i64>,

    /// Distance cutoff for person swaps [default: none]
    #[arg(long)]
    pub tau_near: Option<f64>,

    /// Distance cutoff for place swaps [default: none]
    #[arg(long)]
    pub tau_far: Option<f64>,

    /// Neighbor metric [default: euclidean]
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,

    /// Paraphrases must differ from their source by more than this many words [default: 2]
    #[arg(long, value_name = "N")]
    pub med_threshold: Option<usize>,

    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct GateArgs {
    /// Candidate sets, JSONL {source, candidates}
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Label for the report [default: the provider model]
    #[arg(long)]
    pub name: Option<String>,

    /// [default: 2]
    #[arg(long, value_name = "N")]
    pub med_threshold: Option<usize>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct EvalParaphrasersArgs {
    /// Source sentences, JSONL with a `source` or `text` field
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Paraphraser models to compare
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<String>,

    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Paraphrases requested per source [default: 5]
    #[arg(long, value_name = "N")]
    pub paraphrases: Option<usize>,

    /// [default: 2]
    #[arg(long, value_name = "N")]
    pub med_threshold: Option<usize>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct HviArgs {
    /// Detector flags, JSONL {llm, sentence_id, h_bn, h_ti, h_if, h_p}
    #[arg(long, value_name = "FILE")]
    pub detections: PathBuf,

    /// Sentences generated per LLM, applied to every LLM seen
    #[arg(long, value_name = "N")]
    pub u: Option<u64>,

    /// Per-LLM sentence count, overriding --u
    #[arg(long, value_name = "NAME=N")]
    pub u_per_llm: Vec<String>,

    /// Parameter-count labels for the spectrum
    #[arg(long, value_name = "NAME=LABEL")]
    pub size: Vec<String>,

    /// Damping strength [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Lower bound on each damping factor [default: 0.1]
    #[arg(long)]
    pub delta_floor: Option<f64>,

    /// Values the damping mean and spread are taken over [default: category-counts]
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,

    /// Decimal places in the text spectrum [default: 2]
    #[arg(long)]
    pub precision: Option<usize>,

    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus, JSONL
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum FeEvalCommand {
    /// Score one detector's predictions against a gold corpus
    Score(FeScoreArgs),
    /// Put accuracy tables side by side with macro deltas
    Compare(FeCompareArgs),
}

#[derive(Debug, Args)]
pub struct FeScoreArgs {
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,

    /// Predictions, JSONL {id, label, category?, orig_span?, para_span?, scores?}
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,

    /// Detector name in the table
    #[arg(long, default_value = "detector")]
    pub name: String,

    /// Which gold records count toward accuracy
    #[arg(long, value_enum, default_value_t = ScopeArg::Both)]
    pub scope: ScopeArg,

    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FeCompareArgs {
    /// Accuracy table JSON {name, accuracy, macro}
    #[arg(long, value_name = "FILE")]
    pub table: Vec<PathBuf>,

    /// Inline row NAME=IF,P,BN,TI
    #[arg(long, value_name = "NAME=IF,P,BN,TI")]
    pub row: Vec<String>,

    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// word2vec text table
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub gazetteer: Option<PathBuf>,

    /// Query by table token (spaces become underscores)
    #[arg(long, conflicts_with = "vector", required_unless_present = "vector")]
    pub token: Option<String>,

    /// Query by comma-separated coordinates
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub vector: Option<Vec<f64>>,

    #[arg(long, default_value_t = 5)]
    pub k: usize,

    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,

    #[arg(long, value_enum, default_value_t = ModeArg::Nearest)]
    pub mode: ModeArg,

    /// Euclidean cutoff: at most this for nearest, at least this for farthest
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Restrict results to a gazetteer class
    #[arg(long, value_enum)]
    pub class: Option<ClassArg>,

    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}
