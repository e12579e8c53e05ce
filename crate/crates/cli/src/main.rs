mod config;

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use silentalarm::app::monitor::{follow_file, run_monitor};
use silentalarm::app::{
    self, cmd_augment, cmd_classify, cmd_evaluate, cmd_grid_search, cmd_train, load_classifier, AppError,
    AugmentMode, GridSpec,
};
use silentalarm::corpus::Label;

use config::{Common, FileConfig, MonitorFlags, PipelineFlags};

#[derive(Debug, Parser)]
#[command(name = "silentalarm", version, about = "Detects violent speech in transcribed text and raises silent alerts.")]
struct Cli {
    /// Seed for the split, SMOTE and phrase sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Stop-word list, one word per line.
    #[arg(long, global = true)]
    stoplist: Option<PathBuf>,
    /// Stemmer rule file.
    #[arg(long, global = true)]
    stemrules: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Train the SVM on a single thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and report held-out metrics.
    Train(TrainArgs),
    /// Score a saved model on a labelled corpus.
    Evaluate(EvaluateArgs),
    /// Classify sentences given as arguments, in a file or on stdin.
    Classify(ClassifyArgs),
    /// Classify a line stream and send alerts for violent lines.
    Monitor(MonitorArgs),
    /// Cross-validate a grid of C and gamma values.
    GridSearch(GridArgs),
    /// Generate labelled sentences from a JSGF grammar.
    Augment(AugmentArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Labelled corpus (`label<TAB>sentence` per line).
    corpus: PathBuf,
    /// Where to write the model.
    #[arg(long, short)]
    model: PathBuf,
    /// Also write the evaluation report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record the training date (SOURCE_DATE_EPOCH if set) in the model.
    #[arg(long)]
    stamp_date: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    corpus: PathBuf,
    #[arg(long, short)]
    model: PathBuf,
    /// Embeddings file overriding the one recorded in the model.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Sentences to classify; read from --input or stdin when absent.
    text: Vec<String>,
    #[arg(long, short)]
    model: PathBuf,
    /// File with one sentence per line (`-` for stdin).
    #[arg(long, short, conflicts_with = "text")]
    input: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MonitorArgs {
    #[arg(long, short)]
    model: PathBuf,
    /// Read lines from this file instead of stdin.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Keep reading as the input file grows.
    #[arg(long, requires = "input")]
    follow: bool,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    sinks: MonitorFlags,
}

#[derive(Debug, Args)]
struct GridArgs {
    corpus: PathBuf,
    /// Comma-separated C values.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
    costs: Vec<f64>,
    /// Comma-separated gamma values.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1")]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelArg {
    Violent,
    Benign,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Enumerate,
    Sample,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long, short)]
    grammar: PathBuf,
    /// Rule to expand.
    #[arg(long, short)]
    rule: String,
    #[arg(long, short, value_enum)]
    label: LabelArg,
    #[arg(long, value_enum, default_value = "enumerate")]
    mode: ModeArg,
    /// Maximum phrases in enumerate mode.
    #[arg(long, default_value_t = 10_000)]
    limit: usize,
    /// Phrases to draw in sample mode.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Sample without repeats.
    #[arg(long)]
    dedup: bool,
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { app::EXIT_USAGE as u8 } else { app::EXIT_OK as u8 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::from(app::EXIT_OK as u8),
        Err(e) => {
            eprintln!("silentalarm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let common = Common { seed: cli.seed, stoplist: cli.stoplist, stemrules: cli.stemrules, sequential: cli.sequential };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let write_err = |e| AppError::io("writing output", e);

    match cli.command {
        Command::Train(a) => {
            let cfg = config::pipeline_config(&common, &a.pipeline, &file)?;
            let date = a.stamp_date.then(app::training_date);
            let outcome = cmd_train(&cfg, &a.corpus, &a.model, a.out.as_deref(), date)?;
            info!(
                "{} support vectors from {} training vectors ({} synthetic)",
                outcome.model.support_vectors.len(),
                outcome.train.len() + outcome.synthetic,
                outcome.synthetic
            );
            write!(out, "{}", outcome.report.render_text()).map_err(write_err)?;
        }
        Command::Evaluate(a) => {
            let report = cmd_evaluate(&a.model, &a.corpus, a.embeddings.as_deref(), a.out.as_deref())?;
            write!(out, "{}", report.render_text()).map_err(write_err)?;
        }
        Command::Classify(a) => {
            let lines = if !a.text.is_empty() {
                a.text
            } else {
                read_lines(a.input.as_deref())?
            };
            cmd_classify(&a.model, a.embeddings.as_deref(), &lines, &mut out)?;
        }
        Command::Monitor(a) => {
            let cfg = config::monitor_config(&a.sinks, &file)?;
            let (model, featurizer) = load_classifier(&a.model, a.embeddings.as_deref())?;
            let stats = match (&a.input, a.follow) {
                (Some(p), true) => run_monitor(&cfg, &model, &featurizer, follow_file(p)?, &mut out)?,
                (Some(p), false) => {
                    let f = File::open(p).map_err(|e| AppError::io(format!("opening {}", p.display()), e))?;
                    run_monitor(&cfg, &model, &featurizer, BufReader::new(f), &mut out)?
                }
                (None, _) => run_monitor(&cfg, &model, &featurizer, BufReader::new(io::stdin()), &mut out)?,
            };
            info!(
                "{} lines, {} violent, {} alerts ({} delivered, {} failed, {} dropped)",
                stats.lines, stats.violent, stats.alerts, stats.delivered, stats.failed, stats.dropped
            );
        }
        Command::GridSearch(a) => {
            let cfg = config::pipeline_config(&common, &a.pipeline, &file)?;
            let grid = GridSpec { costs: a.costs, gammas: a.gammas, folds: a.folds };
            let result = cmd_grid_search(&cfg, &a.corpus, &grid)?;
            write!(out, "{}", result.render_text()).map_err(write_err)?;
        }
        Command::Augment(a) => {
            let label = match a.label {
                LabelArg::Violent => Label::Violent,
                LabelArg::Benign => Label::Benign,
            };
            let mode = match a.mode {
                ModeArg::Enumerate => AugmentMode::Enumerate { limit: a.limit },
                ModeArg::Sample => AugmentMode::Sample { count: a.count, dedup: a.dedup },
            };
            let corpus = cmd_augment(&a.grammar, &a.rule, label, mode, common.seed(&file), &a.out)?;
            info!("wrote {} sentences to {}", corpus.len(), a.out.display());
        }
    }
    out.flush().map_err(write_err)
}

fn read_lines(path: Option<&Path>) -> Result<Vec<String>, AppError> {
    let mut text = String::new();
    match path {
        Some(p) if p != Path::new("-") => {
            File::open(p)
                .and_then(|mut f| f.read_to_string(&mut text))
                .map_err(|e| AppError::io(format!("reading {}", p.display()), e))?;
        }
        _ => {
            io::stdin().lock().read_to_string(&mut text).map_err(|e| AppError::io("reading stdin", e))?;
        }
    }
    Ok(text.lines().map(str::to_string).collect())
}

