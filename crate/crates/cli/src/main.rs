//! `incident-featlab`: synthetic data, codebook learning, model training and
//! the detection experiments from the command line.
//!
//! Exit codes: 0 on success, 1 for invalid arguments, configuration or input
//! data, 2 when the run itself fails.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use incident_featlab::eval::FeatureMode;
use incident_featlab::{PairConfig, PreprocessConfig};

use crate::config::RunConfig;
use crate::error::CliError;

const THREADS_ENV: &str = "INCIDENT_FEATLAB_THREADS";

#[derive(Parser)]
#[command(name = "incident-featlab", version, about = "Freeway incident detection with learned features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Synth(SynthArgs),
    /// Learn the four channel codebooks from unlabeled data.
    Learn(RunArgs),
    /// Select hyperparameters by cross-validation and fit one detector.
    Train(RunArgs),
    /// Score a saved detector on a labeled dataset.
    Eval(RunArgs),
    /// Raw-feature experiments over several [x-y] pairs.
    Grid(RunArgs),
    /// Repeated train/test experiment in raw, enhanced or transfer-enhanced mode.
    E2e(RunArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Generator config (JSON) or a manifest from an earlier `synth` run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_units: Option<usize>,
    #[arg(long)]
    site_tag: Option<String>,
}

#[derive(Args)]
pub struct RunArgs {
    /// Run config (JSON) or a manifest from an earlier run of the same command.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<FeatureMode>,
    /// Raw feature pair, e.g. 4-2.
    #[arg(long)]
    pair: Option<PairConfig>,
    /// Comma-separated pairs for `grid`.
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<PairConfig>>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated persistence levels.
    #[arg(long, value_delimiter = ',')]
    pt_levels: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Head-trim depth.
    #[arg(long)]
    z: Option<usize>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Unlabeled codebook source.
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    /// Saved detector for `eval`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output file, or directory for `grid` and `e2e`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn apply(self, mut cfg: RunConfig) -> RunConfig {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(mode, pair, pairs, repeats, pt_levels, seed, folds);
        macro_rules! set_path {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    cfg.$field = self.$field;
                }
            )*};
        }
        set_path!(train, test, unlabeled, model, out);
        if let Some(z) = self.z {
            cfg.preprocess = PreprocessConfig { z };
        }
        cfg
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Validation(format!("{THREADS_ENV} must be a non-negative integer, got `{raw}`"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Learn(a) => commands::learn(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Grid(a) => commands::grid(a),
        Command::E2e(a) => commands::e2e(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
