mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "semcache", version, about = "Semantic image caching toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset manifest and its matrices.
    Validate { dataset: PathBuf },
    /// Expected-savings curve of the analytical model.
    Model(ModelArgs),
    /// Exact vs semantic caching over random pseudo-clients.
    Simulate(SimulateArgs),
    /// Run the origin server from a TOML config.
    Serve { config: PathBuf },
    /// Score image pairs.
    Score(ScoreArgs),
    /// Compare predicted scores with ground truth.
    Evaluate(EvaluateArgs),
    /// Share of inter-article pairs meeting each threshold.
    Usefraction(UsefractionArgs),
    /// Cost per comparison for the published price table.
    Cost(CostArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Serialize)]
pub struct ModelArgs {
    /// Comparisons per category.
    #[arg(long = "N", default_value_t = 164)]
    pub n: u64,
    /// Useful fraction, one per --t.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub u: Vec<f64>,
    /// Image size in bytes.
    #[arg(long = "S", default_value_t = 900_000.0)]
    pub s: f64,
    /// Page weight in bytes.
    #[arg(long = "P", default_value_t = 4_770_000.0)]
    pub p: f64,
    /// Images per article.
    #[arg(long = "I", default_value_t = 1.794)]
    pub i: f64,
    /// Thresholds, matched to --u by position.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub t: Vec<u8>,
    /// Largest cache size; defaults to N.
    #[arg(long)]
    pub xmax: Option<u64>,
    /// Bytes per advertised id.
    #[arg(long, default_value_t = 2.0)]
    pub overhead: f64,
    /// Output directory (one CSV per threshold). Stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    /// Dataset manifest; the default synthetic corpus when omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    pub fw: Vec<usize>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [10, 20, 30, 40])]
    pub ac: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub threshold: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Charge 2 bytes per advertised id.
    #[arg(long)]
    pub overhead: bool,
    /// Cap on cached images (LRU); unbounded when omitted.
    #[arg(long)]
    pub lru_cap: Option<usize>,
    /// Per-trial CSV. Stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-cell box-plot statistics CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    GroundTruth,
    Heuristic,
    Llm,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateArg {
    Base,
    MetricDriven,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineArg {
    Direct,
    TwoStep,
}

#[derive(Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long, value_enum)]
    pub scorer: ScorerKind,
    #[arg(long)]
    pub dataset: PathBuf,
    /// CSV with columns pair_id,website,category,image_a,image_b.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "metric-driven")]
    pub template: TemplateArg,
    #[arg(long, value_enum, default_value = "direct")]
    pub pipeline: PipelineArg,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    /// Base URL the judge uses to fetch images.
    #[arg(long, default_value = "")]
    pub image_base: String,
}

#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    /// CSV with columns pair_id,predicted,truth.
    pub input: PathBuf,
    /// JSON report. Stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row-normalised confusion matrix CSV.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct UsefractionArgs {
    pub dataset: PathBuf,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
    pub t: Vec<u8>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CostArgs {
    #[arg(long, default_value_t = semcache::scorer::DEFAULT_INPUT_TOKENS)]
    pub input_tokens: u64,
    #[arg(long, default_value_t = semcache::scorer::DEFAULT_OUTPUT_TOKENS)]
    pub output_tokens: u64,
    /// Number of comparisons to price in the total column.
    #[arg(long, default_value_t = 1)]
    pub comparisons: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    /// Output directory for manifest.json and matrices/.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub websites: usize,
    #[arg(long, default_value_t = 5)]
    pub categories: usize,
    #[arg(long, default_value_t = 10)]
    pub articles: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !matches!(cli.command, Command::Serve { .. }) {
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    }
    let result = match cli.command {
        Command::Validate { dataset } => commands::validate(&dataset),
        Command::Model(args) => commands::model(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Serve { config } => commands::serve(&config),
        Command::Score(args) => commands::score(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Usefraction(args) => commands::usefraction(&args),
        Command::Cost(args) => commands::cost(&args),
        Command::Synth(args) => commands::synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
