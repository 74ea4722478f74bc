use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tablex::evaluate::{parse_attr_match, run_calibrate, run_evaluate, EvaluateArgs, Metric};
use tablex::extract::{load_positions, load_schema, run_extract, ExtractSettings, Mode, Model};
use tablex::inspect::{run_inspect, Inspect};
use tablex::leaderboard::{run_leaderboard, LeaderboardArgs};
use tablex::{Outcome, EXIT_FATAL};
use tablex_core::engine::EngineConfig;
use tablex_core::leaderboard::LinkConfig;
use tablex_core::prompt::PromptOptions;
use tablex_core::schema::SchemaMode;
use tablex_core::table::TableFormat;

/// Schema-driven extraction of JSON records from scientific tables.
///
/// The model endpoint is read from TABLEX_ENDPOINT, TABLEX_API_KEY and
/// TABLEX_MODEL unless --replay is given.
#[derive(Parser)]
#[command(name = "tablex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the parsed cell grid of table files.
    Parse(InspectArgs),
    /// Print the target cells of table files.
    Detect(InspectArgs),
    /// Extract records from every table of a dataset.
    Extract(ExtractArgs),
    /// Score predicted records against gold records.
    Evaluate(EvaluateCli),
    /// Pick the token-F1 threshold that best agrees with labelled pairs.
    Calibrate(CalibrateArgs),
    /// Link extracted results to a leaderboard taxonomy.
    Leaderboard(LeaderboardCli),
    /// Export per-cell teacher examples for distillation.
    DistillExport(DistillArgs),
}

#[derive(Args)]
struct InspectArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Override the format implied by the file extension.
    #[arg(long)]
    format: Option<TableFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Answer prompts from a recorded transcript instead of the endpoint.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long, default_value_t = 2048)]
    max_tokens: usize,
}

#[derive(Args)]
struct PromptArgs {
    /// Context paragraphs retrieved per table.
    #[arg(long, default_value_t = 2)]
    context_k: usize,
    #[arg(long)]
    no_context: bool,
    /// Include the caption in the prompt.
    #[arg(long)]
    caption: bool,
}

impl PromptArgs {
    fn options(&self) -> PromptOptions {
        PromptOptions {
            include_context: !self.no_context,
            context_k: self.context_k,
            include_caption: self.caption,
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Schema file, or a bundled schema name (ml, chemistry, discomat, swde_<vertical>, ...).
    #[arg(long)]
    schema: String,
    /// Page schemas always run in page mode.
    #[arg(long, value_enum, default_value_t = Mode::FullTable)]
    mode: Mode,
    #[command(flatten)]
    prompt: PromptArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Write each table's prompt here.
    #[arg(long)]
    dump_prompt: Option<PathBuf>,
    /// Re-prompt budget per table; defaults to the number of targets.
    #[arg(long)]
    max_reprompts: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// JSON map of table id to [row, col] target positions.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateCli {
    #[arg(long)]
    pred: PathBuf,
    /// Gold JSONL file, or a dataset directory with gold.jsonl per document.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum, default_value_t = Metric::TableF1)]
    metric: Metric,
    /// `token_f1:<threshold>` or `em`.
    #[arg(long, default_value = "token_f1:0.25")]
    attr: String,
    /// Do not count the record type as an attribute.
    #[arg(long)]
    no_type_attr: bool,
    /// Dataset with the HTML pages, for page-f1.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// JSONL of {"pred", "gold", "match"}.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LeaderboardCli {
    #[arg(long)]
    papers: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[arg(long, default_value = "ml_leaderboard")]
    schema: String,
    /// Link these extracted records instead of calling the model.
    #[arg(long)]
    records: Option<PathBuf>,
    /// JSON map of table id to candidate [row, col] positions, for tables without bold cells.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// JSONL of gold {paper, task, dataset, metric, score}.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    min_match: f64,
    #[command(flatten)]
    prompt: PromptArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistillArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    schema: String,
    #[command(flatten)]
    prompt: PromptArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn engine_config(
    prompt: &PromptArgs,
    model: &ModelArgs,
    max_reprompts: Option<usize>,
) -> EngineConfig {
    EngineConfig {
        prompt: prompt.options(),
        max_reprompts,
        max_tokens: model.max_tokens,
        ..EngineConfig::default()
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Parse(a) => run_inspect(Inspect::Parse, &a.paths, a.format, a.out.as_deref()),
        Command::Detect(a) => run_inspect(Inspect::Detect, &a.paths, a.format, a.out.as_deref()),
        Command::Extract(a) => {
            let schema = load_schema(&a.schema)?;
            let mode = if schema.mode == SchemaMode::Page {
                Mode::Page
            } else {
                a.mode
            };
            let model = Model::from_args(a.model.replay.as_deref())?;
            let settings = ExtractSettings {
                dataset: a.dataset,
                schema_label: a.schema,
                schema,
                mode,
                engine: engine_config(&a.prompt, &a.model, a.max_reprompts),
                out: a.out,
                workers: a.workers,
                dump_prompt: a.dump_prompt,
                targets: a.targets.as_deref().map(load_positions).transpose()?,
                distill: false,
            };
            run_extract(&settings, &model)
        }
        Command::DistillExport(a) => {
            let schema = load_schema(&a.schema)?;
            anyhow::ensure!(
                schema.mode == SchemaMode::Cell,
                "distillation needs a cell schema"
            );
            let model = Model::from_args(a.model.replay.as_deref())?;
            let settings = ExtractSettings {
                dataset: a.dataset,
                schema_label: a.schema,
                schema,
                mode: Mode::PerCell,
                engine: engine_config(&a.prompt, &a.model, None),
                out: a.out,
                workers: a.workers,
                dump_prompt: None,
                targets: a.targets.as_deref().map(load_positions).transpose()?,
                distill: true,
            };
            run_extract(&settings, &model)
        }
        Command::Evaluate(a) => {
            let mut attr = parse_attr_match(&a.attr)?;
            attr.count_type = !a.no_type_attr;
            let args = EvaluateArgs {
                pred: a.pred,
                gold: a.gold,
                metric: a.metric,
                attr,
                dataset: a.dataset,
                out: a.out,
            };
            print!("{}", run_evaluate(&args)?);
            Ok(Outcome::Success)
        }
        Command::Calibrate(a) => {
            print!("{}", run_calibrate(&a.pairs, a.out.as_deref())?);
            Ok(Outcome::Success)
        }
        Command::Leaderboard(a) => {
            let model = match &a.records {
                Some(_) => None,
                None => Some(Model::from_args(a.model.replay.as_deref())?),
            };
            let args = LeaderboardArgs {
                papers: a.papers,
                taxonomy: a.taxonomy,
                schema: load_schema(&a.schema)?,
                records: a.records,
                candidates: a.candidates,
                gold: a.gold,
                link: LinkConfig {
                    min_match: a.min_match,
                },
                engine: engine_config(&a.prompt, &a.model, None),
                out: a.out,
            };
            run_leaderboard(&args, model.as_ref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
