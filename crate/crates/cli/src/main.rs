//! `mmif`: evaluation, verification and data generation from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use mmif_core::datagen::AblationSetting;
use mmif_core::evalrun::{Metric, Strictness};

const EXIT_FAIL: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    /// Bad flag combination.
    Usage(String),
    /// Input that does not satisfy a documented precondition.
    Validation(String),
    /// A verification ran and did not pass; the verdict is already printed.
    Failed,
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mmif", version, about = "Hybrid instruction-following evaluation and data generation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrictnessArg {
    Strict,
    Lenient,
}

impl From<StrictnessArg> for Strictness {
    fn from(s: StrictnessArg) -> Self {
        match s {
            StrictnessArg::Strict => Strictness::Strict,
            StrictnessArg::Lenient => Strictness::Lenient,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Fraction,
    StrictPass,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Fraction => Metric::Fraction,
            MetricArg::StrictPass => Metric::StrictPass,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration JSON; individual flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Taxonomy override JSON.
    #[arg(long, global = true, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    /// Judge client configuration (also used for extraction and validation).
    #[arg(long, global = true, value_name = "FILE")]
    pub judge: Option<PathBuf>,
    /// Model-under-test client configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Data-generation client configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub generator: Option<PathBuf>,
    /// Serve every client role not configured otherwise from this fixture file.
    #[arg(long, global = true, value_name = "FILE")]
    pub stub_fixtures: Option<PathBuf>,
    /// Seed for every random choice (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker count for evaluation, scoring and pair generation (default 1).
    #[arg(long, global = true, value_name = "N")]
    pub parallelism: Option<usize>,
    /// Reject malformed input (strict, default) or skip it with a warning.
    #[arg(long, global = true, value_enum)]
    pub strictness: Option<StrictnessArg>,
    /// Per-item accuracy: satisfied fraction (default) or all-or-nothing.
    #[arg(long, global = true, value_enum)]
    pub metric: Option<MetricArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate responses against a benchmark.
    Eval(EvalArgs),
    /// Run one verifier on a text.
    Verify(VerifyArgs),
    /// Bind a constraint description to a verifier call.
    Extract(ExtractArgs),
    /// Show the verifier registry.
    Verifiers(VerifiersArgs),
    /// Re-aggregate a results file into a report.
    Report(ReportArgs),
    /// Build preference pairs by ablation.
    GenPairs(GenPairsArgs),
    /// Generate constrained instructions from an image manifest.
    GenInstructions(GenInstructionsArgs),
    /// Score and filter SFT records by compliance.
    SftFilter(SftFilterArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Benchmark JSONL.
    #[arg(long, value_name = "FILE")]
    pub bench: PathBuf,
    /// Recorded responses, `{id, response}` JSONL.
    #[arg(long, value_name = "FILE")]
    pub responses: Option<PathBuf>,
    /// Recorded control responses, `{id, idx, response}` JSONL.
    #[arg(long, value_name = "FILE")]
    pub controls: Option<PathBuf>,
    /// Results JSONL (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Markdown report.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// CSV report.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Run manifest (defaults to `<out>.manifest.json` when `--out` is set).
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["function", "constraint"])))]
#[command(group(ArgGroup::new("input").required(true).args(["text", "stdin"])))]
pub struct VerifyArgs {
    /// Verifier name.
    #[arg(long)]
    pub function: Option<String>,
    /// Parameters as a JSON array or Python-style literal.
    #[arg(long, requires = "function", default_value = "[]", allow_hyphen_values = true)]
    pub params: String,
    /// Constraint description, bound through extraction.
    #[arg(long)]
    pub constraint: Option<String>,
    /// File holding the text to verify.
    #[arg(long, value_name = "FILE")]
    pub text: Option<PathBuf>,
    /// Read the text from standard input.
    #[arg(long)]
    pub stdin: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub constraint: String,
}

#[derive(Debug, Args)]
pub struct VerifiersArgs {
    /// List name, signature and description of every verifier.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    pub bench: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub results: PathBuf,
    /// Markdown report (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenPairsArgs {
    /// SFT JSONL with responses.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Ablation: remove-33, remove-66, remove-100 or no-image.
    #[arg(long, value_parser = clap::value_parser!(AblationSetting))]
    pub setting: AblationSetting,
    /// Preference-pair JSONL (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenInstructionsArgs {
    /// Image manifest JSONL, `{id, image?, question?}` per line.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Task pool JSON (built-in pool when omitted).
    #[arg(long, value_name = "FILE")]
    pub taskpool: Option<PathBuf>,
    #[arg(long, default_value_t = mmif_core::datagen::MIN_CONSTRAINTS)]
    pub n_constraints_min: usize,
    #[arg(long, default_value_t = mmif_core::datagen::MAX_CONSTRAINTS)]
    pub n_constraints_max: usize,
    /// Exemplar tasks sampled per image.
    #[arg(long, default_value_t = mmif_core::datagen::DEFAULT_TASK_K)]
    pub task_k: usize,
    /// Constraint classes offered to the generator per record.
    #[arg(long, default_value_t = mmif_core::datagen::DEFAULT_CANDIDATE_CLASSES)]
    pub candidate_classes: usize,
    /// Question-filter patterns JSON.
    #[arg(long, value_name = "FILE")]
    pub filter_config: Option<PathBuf>,
    /// Ask the generator for new tasks instead of using pool exemplars directly.
    #[arg(long)]
    pub generate_tasks: bool,
    /// Generate a response for each record with the generator client.
    #[arg(long)]
    pub with_responses: bool,
    /// Instruction JSONL (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Rejection report JSONL, `{id, reason}` per line.
    #[arg(long, value_name = "FILE")]
    pub rejections: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SftFilterArgs {
    /// SFT JSONL with responses.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Minimum compliance (satisfied fraction) to keep a record.
    #[arg(long, default_value_t = mmif_core::datagen::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Kept records (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Dropped records.
    #[arg(long, value_name = "FILE")]
    pub dropped: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match &cli.command {
        Command::Eval(a) => commands::eval(&cli.global, a),
        Command::Verify(a) => commands::verify(&cli.global, a),
        Command::Extract(a) => commands::extract(&cli.global, a),
        Command::Verifiers(a) => commands::verifiers(a),
        Command::Report(a) => commands::report(&cli.global, a),
        Command::GenPairs(a) => commands::gen_pairs(&cli.global, a),
        Command::GenInstructions(a) => commands::gen_instructions(&cli.global, a),
        Command::SftFilter(a) => commands::sft_filter(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed) => ExitCode::from(EXIT_FAIL),
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(CliError::Runtime(e))
            if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
