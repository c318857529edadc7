//! Command-line front end for the corpus, classification, and
//! evaluation pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hcbench::corpus::Task;

mod commands;

#[derive(Parser)]
#[command(
    name = "hcbench",
    version,
    about = "Generate paired corpora, classify them with language models or a word-frequency detector, and evaluate the results."
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// TOML run configuration; built-in defaults apply when omitted
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Random seed; overrides the configured value
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Answer every request from the offline mock provider
    #[arg(long, global = true)]
    mock: bool,

    /// Output directory; overrides the configured value
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Log request and response payloads, with credentials redacted
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate machine and hybrid variants of human abstracts
    Generate(GenerateArgs),
    /// Label task samples by prompting a model
    Classify(ClassifyArgs),
    /// Fit the word-frequency detector on labeled abstracts
    HcTrain(HcTrainArgs),
    /// Label abstracts with a saved word-frequency model
    HcClassify(HcClassifyArgs),
    /// Word-frequency training followed by word-informed prompting
    Hybrid(HybridArgs),
    /// Error rates, per-group breakdowns, and difficulty strata
    Eval(EvalArgs),
    /// Pairwise agreement between prediction runs
    Agree(EvalArgs),
    /// Error spread of one model across repeated runs
    Stability(StabilityArgs),
    /// Rank methods per task from an error table
    Rank(RankArgs),
    /// Interactively label citation contexts
    Annotate(AnnotateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Abstract records; only human-written entries are used
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Comma-separated variants to produce
    #[arg(long, value_name = "LIST", default_value = "AI,humAI")]
    kinds: String,

    /// Provider name from the config; defaults to the configured one
    #[arg(long, value_name = "NAME")]
    provider: Option<String>,

    /// Generation cache; survives interrupted runs
    #[arg(long, value_name = "FILE")]
    cache: Option<PathBuf>,

    /// Combined corpus destination
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Task samples: abstracts for AC tasks, citations for CC tasks
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Task to run: AC1, AC2, CC1, or CC2
    #[arg(long, value_name = "TASK")]
    task: Task,

    /// Provider name from the config
    #[arg(long, value_name = "NAME")]
    provider: Option<String>,

    /// Run identifier; repeat with different values for stability checks
    #[arg(long, value_name = "ID")]
    run_id: Option<String>,

    /// Restrict AC pairs to variants produced by this generator
    #[arg(long, value_name = "NAME")]
    generator: Option<String>,
}

#[derive(Args)]
struct HcTrainArgs {
    /// Labeled abstract records
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Task to train for: AC1 or AC2
    #[arg(long, value_name = "TASK")]
    task: Task,

    /// Hold out 1-f of the authors for testing and save both halves
    #[arg(long, value_name = "F")]
    train_fraction: Option<f64>,

    /// Restrict pairs to variants produced by this generator
    #[arg(long, value_name = "NAME")]
    generator: Option<String>,

    /// Model destination
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct HcClassifyArgs {
    /// Abstract records to label
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Task the model was trained for
    #[arg(long, value_name = "TASK")]
    task: Task,

    /// Saved word-frequency model
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// Run identifier
    #[arg(long, value_name = "ID")]
    run_id: Option<String>,

    /// Restrict pairs to variants produced by this generator
    #[arg(long, value_name = "NAME")]
    generator: Option<String>,
}

#[derive(Args)]
struct HybridArgs {
    /// Labeled abstract records; split by author into train and test
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Task to run: AC1 or AC2
    #[arg(long, value_name = "TASK")]
    task: Task,

    /// Provider name from the config
    #[arg(long, value_name = "NAME")]
    provider: Option<String>,

    /// Run identifier
    #[arg(long, value_name = "ID")]
    run_id: Option<String>,

    /// Fraction of authors used for training; overrides the config
    #[arg(long, value_name = "F")]
    train_fraction: Option<f64>,

    /// Restrict pairs to variants produced by this generator
    #[arg(long, value_name = "NAME")]
    generator: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction records, one or more runs
    #[arg(long, value_name = "FILE", required = true, num_args = 1..)]
    predictions: Vec<PathBuf>,

    /// Gold source: abstract or citation records matching the task
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,

    /// Task the predictions belong to
    #[arg(long, value_name = "TASK")]
    task: Task,

    /// Restrict AC gold pairs to variants produced by this generator
    #[arg(long, value_name = "NAME")]
    generator: Option<String>,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    eval: EvalArgs,

    /// Model whose runs are compared
    #[arg(long, value_name = "ID")]
    model_id: String,
}

#[derive(Args)]
struct RankArgs {
    /// CSV with columns task, model_id, error
    #[arg(long, value_name = "FILE")]
    errors: PathBuf,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Citation instances to label
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Progress log; answers append here and prior sessions resume
    #[arg(long, value_name = "FILE")]
    progress: Option<PathBuf>,

    /// Labeled instance destination
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::FAILURE
        }
    }
}
