//! `invnet`: invertible-network classifiers with boundary-projection
//! explanations, feature selection and downstream validation.

mod commands;
mod config;
mod plots;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invnet_core::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "invnet", version, about)]
pub struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Train a classifier on a dataset.
    Train(TrainArgs),
    /// Per-sample explanations, importance ranking and histograms.
    Explain(ExplainArgs),
    /// Select the top-ranked fraction of features.
    Select(SelectArgs),
    /// Nested cross-validated SVR on all features and on a subset.
    Regress(RegressArgs),
    /// Two-panel decision boundary figure for 2-D data.
    PlotBoundary(PlotArgs),
    /// Turn per-subject ROI time series into connectivity features.
    Ingest(IngestArgs),
    /// Classification metrics of a model on a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// two-moons, diagonal, axis or sparse.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation (two-moons and sparse).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Distance between class means (diagonal and axis).
    #[arg(long)]
    pub separation: Option<f64>,
    /// Spread along the separating line (diagonal).
    #[arg(long)]
    pub along_sd: Option<f64>,
    /// Dimension (sparse).
    #[arg(long)]
    pub d: Option<usize>,
    /// Informative features (sparse).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Per-epoch loss CSV; defaults to `<model_out>.loss.csv`.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub num_blocks: Option<usize>,
    /// Held-out fraction for the reported accuracy (0 trains on everything).
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub hist_top: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub ranking: PathBuf,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Target column (repeatable); defaults to every target in the dataset.
    #[arg(long = "target")]
    pub targets: Vec<String>,
    /// Index-set file with the selected features.
    #[arg(long)]
    pub subset: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Comma-separated penalty grid.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub svr_epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of per-subject time-series CSVs.
    #[arg(long)]
    pub input_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Subject table `subject_id,label[,target_<name>…]`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Bootstrap copies per subject (0 disables augmentation).
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long)]
    pub block_len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Optional CSV copy of the metrics.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numeric => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
