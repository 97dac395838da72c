//! `wsgat` — weakly-supervised graph classification from the command line.
//!
//! Subcommands: `fetch` (download a TUDataset corpus), `run` (train and
//! evaluate once), `sweep` (window-fraction or BFS-depth sweeps),
//! `baseline` (whole-graph training), `export-topk` (DOT files of the
//! best-scored subgraphs). Exit codes: 0 success, 1 runtime failure,
//! 2 configuration or usage error.

mod config;
mod export;
mod fetch;
mod runner;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Overrides};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage; exits with status 2.
    Config(String),
    /// Failure while executing a valid configuration; exits with status 1.
    Runtime(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "wsgat", version, about = "Weakly-supervised graph classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Config file (TOML); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dataset name, e.g. DD or MSRC_21; overrides the config file.
    #[arg(long, value_name = "NAME")]
    dataset: Option<String>,
    /// Output directory for run artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed for every random stream in the run.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Deterministic sample of this many graphs (0 = all).
    #[arg(long, value_name = "N")]
    subset: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Download and unpack a TUDataset corpus.
    Fetch {
        /// Dataset name, e.g. DD or MSRC_21.
        #[arg(long, value_name = "NAME")]
        dataset: String,
        /// Archive host; `<base-url>/<NAME>.zip` is downloaded.
        #[arg(long, value_name = "URL", default_value = fetch::DEFAULT_BASE_URL)]
        base_url: String,
        /// Directory to unpack into (default: $WSGAT_DATA_DIR or ./data).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Train on extracted subgraphs and evaluate with top-K aggregation.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one training per swept parameter value and tabulate accuracy.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Run this many sweep points concurrently.
        #[arg(long, value_name = "N", default_value_t = 1)]
        parallel: usize,
    },
    /// Train and evaluate on whole graphs, no extraction or top-K.
    Baseline {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write DOT files for the top-K subgraphs of one graph.
    ExportTopk {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint produced by `run` or `baseline`.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Graph index within the dataset.
        #[arg(long, value_name = "ID")]
        graph: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fetch {
            dataset,
            base_url,
            out,
        } => fetch::execute_fetch(&dataset, &base_url, out),
        Command::Run { common } => {
            let (file, over) = load_common(&common)?;
            let rc = config::resolve(&file, &over, "runs/run")?;
            let out = runner::execute_run(&rc, false)?;
            println!("accuracy {}", out.accuracy);
            Ok(())
        }
        Command::Baseline { common } => {
            let (mut file, over) = load_common(&common)?;
            file.mode = Some(config::RunMode::Baseline);
            let rc = config::resolve(&file, &over, "runs/baseline")?;
            let out = runner::execute_run(&rc, false)?;
            println!("accuracy {}", out.accuracy);
            Ok(())
        }
        Command::Sweep { common, parallel } => {
            let (file, over) = load_common(&common)?;
            let sweep = file.sweep.clone().ok_or_else(|| {
                CliError::Config("sweep needs a [sweep] section in the config file".into())
            })?;
            sweep::execute_sweep(&file, &over, &sweep, parallel.max(1))
        }
        Command::ExportTopk {
            common,
            checkpoint,
            graph,
        } => {
            let (file, over) = load_common(&common)?;
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs/export"));
            export::execute_export(&checkpoint, &file, &over, graph, out)
        }
    }
}

fn load_common(common: &CommonArgs) -> Result<(FileConfig, Overrides), CliError> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let over = Overrides {
        dataset: common.dataset.clone(),
        out: common.out.clone(),
        seed: common.seed,
        subset: common.subset,
    };
    Ok((file, over))
}
