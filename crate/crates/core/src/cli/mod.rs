//! The `cnqe` command-line tool: configuration, persistence and subcommands.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
//! Failures print `{"error": {"kind", "message"}, "exit_code"}` to stderr.

mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_baseline, cmd_fourier_check, cmd_inspect, cmd_stats, cmd_train, stats_from_csv, FourierCheckArgs, FOURIER_HEADER,
    STATS_HEADER,
};
pub use config::{BaselineBlock, DatasetConfig, ExperimentConfig, LayoutFile, NoiseBlock, DATA_DIR_ENV};
pub use output::{parse_history_csv, Checkpoint, Summary};

use crate::data::DataError;
use crate::fourier::FourierError;
use crate::metrics::MetricError;
use crate::noise::NoiseError;
use crate::training::TrainError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Data(_) | Self::Io { .. } => EXIT_DATA,
            Self::Train(e) => match e {
                TrainError::Config(_)
                | TrainError::EvenRuns(_)
                | TrainError::Embedding(_)
                | TrainError::Ansatz(_)
                | TrainError::Noise(NoiseError::InvalidModel(_) | NoiseError::BadProbability(_)) => EXIT_CONFIG,
                TrainError::TooFewSamples { .. } | TrainError::Metric(MetricError::EmptyClass(_)) => EXIT_DATA,
                _ => EXIT_NUMERIC,
            },
            Self::Fourier(FourierError::Sim(_)) => EXIT_NUMERIC,
            Self::Fourier(_) => EXIT_CONFIG,
            Self::Metric(MetricError::EmptyClass(_) | MetricError::TooFewSamples { .. }) => EXIT_DATA,
            Self::Metric(_) | Self::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config",
            EXIT_DATA => "data",
            _ => "numeric",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() },
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "cnqe", version, about = "Train and evaluate convolutional neural quantum embeddings")]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Training seed; overrides `train.seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the interface network, select the median run and train QCNN classifiers.
    Train,
    /// Classical-head or autoencoder baseline.
    Baseline,
    /// Pairwise Welch tests with Bonferroni correction over `group,metric,value` CSVs.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Fourier spectrum of an embedding layout, verified against direct simulation.
    FourierCheck {
        /// Feature map kind, e.g. `zz_unit`.
        #[arg(long, conflicts_with = "layout")]
        kind: Option<String>,
        #[arg(long, default_value_t = 2)]
        qubits: usize,
        /// Layout JSON; the one-qubit Hadamard sandwich is used when neither this nor
        /// `--kind` is given.
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Random inputs used for the reconstruction check.
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Describe a checkpoint, summary, config, noise model or dataset file.
    Inspect { path: PathBuf },
}

fn load_experiment(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError::Invalid("--threads must be positive".into()).into());
        }
        // Fails only if a pool already exists, in which case that pool is used.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Train => {
            let cfg = load_experiment(&cli)?;
            cmd_train(&cfg).map(|_| ())
        }
        Command::Baseline => {
            let cfg = load_experiment(&cli)?;
            cmd_baseline(&cfg).map(|_| ())
        }
        Command::Stats { inputs } => {
            let csv = cmd_stats(inputs)?;
            emit(&cli.out, "stats.csv", &csv)
        }
        Command::FourierCheck {
            kind,
            qubits,
            layout,
            samples,
        } => {
            let args = FourierCheckArgs {
                kind: kind.clone(),
                qubits: *qubits,
                layout: layout.clone(),
                samples: *samples,
                seed: cli.seed.unwrap_or(0),
            };
            let csv = cmd_fourier_check(&args)?;
            emit(&cli.out, "fourier.csv", &csv)
        }
        Command::Inspect { path } => {
            print_stdout(&format!("{}\n", cmd_inspect(path)?));
            Ok(())
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
pub(crate) fn print_stdout(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<(), CliError> {
    match out {
        None => {
            print_stdout(text);
            Ok(())
        }
        Some(dir) => output::OutputDir::create(dir)?.write(name, text),
    }
}

/// Parses process arguments, runs, and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            print_stdout(&e.to_string());
            return 0;
        }
        Err(e) => {
            let err = CliError::Config(ConfigError::Parse(e.to_string().trim().to_string()));
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
