//! `featcross` command-line tool.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or schema error,
//! 3 I/O error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use featcross::cin_check::{self, CinExperiment, CinMode, CinReport};
use featcross::pipeline::{self, worker_pool};
use featcross::producer::{bench_latency, Producer, ProducerArtifact};
use featcross::search::SearchControl;
use featcross::tabular::{load_csv, read_csv, FeatureSchema};
use featcross::{Error, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "featcross", version, about = "Search high-order cross features and serve the result")]
struct Cli {
    /// Worker threads for candidate training and tuning (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search crosses on a labeled CSV and write an artifact.
    Fit {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Progress records, one JSON object per line.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write the bucket id of every feature-set member for each input row.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write one probability per input row.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print AUC and logloss on a labeled CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run only the hyper-parameter grid and print the best setting.
    Tune {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit entry-wise product embeddings to cross families and print residuals as TSV.
    CinCheck {
        #[arg(long, default_value_t = 4)]
        d_rows: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// representable, adversarial or random.
        #[arg(long, default_value = "adversarial")]
        mode: String,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to run.
        #[arg(long, default_value_t = 1)]
        trials: u64,
    },
    /// Measure per-row transform + predict latency.
    #[command(visible_alias = "bench-latency")]
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
}

/// An error tagged with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            _ if e.is_io() => 3,
            Error::Config(_) | Error::Schema(_) | Error::MissingLabel(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e).into()
    }
}

/// Any failure to read the schema or config is a configuration error.
fn config_failure(what: &str, path: &Path, e: Error) -> Failure {
    Failure {
        code: 2,
        message: format!("cannot use {what} {}: {e}", path.display()),
    }
}

fn load_schema(path: &Path) -> Result<FeatureSchema, Failure> {
    FeatureSchema::from_path(path).map_err(|e| config_failure("schema", path, e))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::from_path(p).map_err(|e| config_failure("config", p, e)),
        None => Ok(RunConfig::default()),
    }
}

fn load_artifact(path: &Path) -> Result<Producer, Failure> {
    let artifact = ProducerArtifact::load(path)?;
    Ok(Producer::new(&artifact)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit {
            train,
            schema,
            config,
            out,
            log,
        } => {
            let schema = load_schema(&schema)?;
            let config = load_config(config.as_deref())?;
            let table = load_csv(&train, &schema)?;
            let pool = worker_pool(cli.workers)?;
            let control = SearchControl::new();
            let flag = control.flag();
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, std::sync::atomic::Ordering::SeqCst)) {
                log::warn!("cannot install interrupt handler: {e}");
            }
            let mut log_out = log.as_deref().map(create).transpose()?;
            let mut log_error = None;
            let fitted = pipeline::fit(&table, &config, &pool, &control, &mut |rec| {
                if let Some(w) = log_out.as_mut() {
                    let line = serde_json::to_string(rec).expect("records serialize");
                    if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                        log_error.get_or_insert(e);
                    }
                }
            })?;
            if let Some(e) = log_error {
                return Err(e.into());
            }
            fitted.artifact.save(&out)?;
            let summary = serde_json::json!({
                "base_auc": fitted.state.base_auc,
                "solution_auc": fitted.state.solution_auc,
                "crosses": fitted.state.solution.crosses().len(),
                "iterations": fitted.state.iteration,
                "stop_reason": fitted.state.stop_reason,
                "elapsed_secs": fitted.elapsed_secs,
            });
            println!("{summary}");
        }
        Command::Transform { model, input, output } => {
            let artifact = ProducerArtifact::load(&model)?;
            let producer = Producer::new(&artifact)?;
            let names: Vec<String> = artifact.base_fields.iter().map(|b| b.name.clone()).collect();
            let header: Vec<String> = artifact
                .feature_set
                .members()
                .iter()
                .map(|m| m.display_name(&names))
                .collect();
            producer.transform_csv(File::open(&input)?, create(&output)?, &header)?;
        }
        Command::Predict { model, input, output } => {
            let producer = load_artifact(&model)?;
            producer.score_csv(File::open(&input)?, create(&output)?)?;
        }
        Command::Eval { model, input } => {
            let producer = load_artifact(&model)?;
            let m = producer.evaluate_csv(File::open(&input)?)?;
            println!("{}", serde_json::to_string(&m)?);
        }
        Command::Tune { train, schema, config } => {
            let schema = load_schema(&schema)?;
            let config = load_config(config.as_deref())?;
            let table = load_csv(&train, &schema)?;
            let pool = worker_pool(cli.workers)?;
            let prepared = pipeline::prepare(&table, &config)?;
            let outcome = pipeline::tune(&prepared, &config, &pool)?;
            let summary = serde_json::json!({
                "best": outcome.best,
                "validation_auc": outcome.best_auc,
                "evaluated": outcome.evaluated(),
            });
            println!("{summary}");
        }
        Command::CinCheck {
            d_rows,
            m,
            n,
            mode,
            restarts,
            seed,
            trials,
        } => {
            let mode: CinMode = mode.parse().map_err(|e: Error| Failure {
                code: 2,
                message: e.to_string(),
            })?;
            let stdout = io::stdout();
            let mut w = stdout.lock();
            writeln!(w, "{}", CinReport::TSV_HEADER)?;
            for s in seed..seed + trials {
                let exp = CinExperiment {
                    d_rows,
                    m,
                    n,
                    mode,
                    seed: s,
                    restarts,
                };
                writeln!(w, "{}", cin_check::run(&exp)?.tsv_line())?;
            }
        }
        Command::Bench {
            model,
            input,
            repetitions,
        } => {
            let producer = load_artifact(&model)?;
            let table = read_csv(File::open(&input)?, producer.schema(), false)?;
            let rows: Vec<_> = (0..table.n_rows()).map(|r| table.row(r)).collect();
            let report = bench_latency(&producer, &rows, repetitions)?;
            println!("{}", serde_json::to_string(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
