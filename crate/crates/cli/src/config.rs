//! Run configuration: an optional TOML file with one table per command,
//! overridden by command-line flags.
//!
//! ```toml
//! format_version = 1
//!
//! [train]
//! learning_rate = 0.01
//! epochs = 50
//! seed = 7
//! ```

use std::path::Path;

use invnet_core::validation::{CvConfig, DEFAULT_LAMBDA_GRID};
use invnet_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub kind: String,
    pub n: usize,
    pub noise: f64,
    pub separation: f64,
    pub along_sd: f64,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            kind: "two-moons".into(),
            n: 2000,
            noise: 0.1,
            separation: 2.0,
            along_sd: 1.0,
            d: 200,
            k: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub num_blocks: usize,
    /// Fraction of samples held out for the reported accuracy.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        let t = invnet_core::net::TrainConfig::default();
        TrainParams {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            hidden_dim: t.hidden_dim,
            num_blocks: t.num_blocks,
            holdout: 0.2,
            seed: t.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainParams {
    /// Histograms are drawn for this many top-ranked features (all features
    /// when the dimension is at most this).
    pub hist_top: usize,
    pub bins: usize,
}

impl Default for ExplainParams {
    fn default() -> Self {
        ExplainParams { hist_top: 3, bins: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectParams {
    pub fraction: f64,
}

impl Default for SelectParams {
    fn default() -> Self {
        SelectParams { fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressParams {
    /// Targets to evaluate; empty means every target in the dataset.
    pub targets: Vec<String>,
    pub folds: usize,
    pub inner_folds: usize,
    pub lambda_grid: Vec<f64>,
    pub epsilon: f64,
    pub svr_epochs: usize,
    pub seed: u64,
}

impl Default for RegressParams {
    fn default() -> Self {
        let cv = CvConfig::default();
        RegressParams {
            targets: Vec::new(),
            folds: cv.folds,
            inner_folds: cv.inner_folds,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            epsilon: cv.epsilon,
            svr_epochs: cv.svr_epochs,
            seed: cv.seed,
        }
    }
}

impl RegressParams {
    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            inner_folds: self.inner_folds,
            lambda_grid: self.lambda_grid.clone(),
            epsilon: self.epsilon,
            svr_epochs: self.svr_epochs,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotParams {
    /// Points sampled along the boundary line.
    pub samples: usize,
    /// Relative margin around the feature-domain data used to clip the line.
    pub margin: f64,
}

impl Default for PlotParams {
    fn default() -> Self {
        PlotParams { samples: 400, margin: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestParams {
    /// Bootstrap copies per subject; 0 keeps one unresampled row per subject.
    pub copies: usize,
    pub block_len: usize,
    pub seed: u64,
}

impl Default for IngestParams {
    fn default() -> Self {
        IngestParams { copies: 0, block_len: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    #[serde(default)]
    pub simulate: Option<SimulateParams>,
    #[serde(default)]
    pub train: Option<TrainParams>,
    #[serde(default)]
    pub explain: Option<ExplainParams>,
    #[serde(default)]
    pub select: Option<SelectParams>,
    #[serde(default)]
    pub regress: Option<RegressParams>,
    #[serde(default, rename = "plot-boundary")]
    pub plot_boundary: Option<PlotParams>,
    #[serde(default)]
    pub ingest: Option<IngestParams>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig {
                format_version: FORMAT_VERSION,
                ..Default::default()
            });
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if cfg.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported config format_version {} (expected {FORMAT_VERSION})",
                cfg.format_version
            )));
        }
        Ok(cfg)
    }
}

/// Comment lines recording the command, its inputs and resolved parameters.
pub fn provenance<P: Serialize>(command: &str, inputs: &[(&str, String)], params: &P) -> Vec<String> {
    let mut lines = vec![
        format!("generated by invnet {command}"),
        format!("format_version = {FORMAT_VERSION}"),
    ];
    for (name, value) in inputs {
        lines.push(format!("{name} = {value:?}"));
    }
    let body = toml::to_string(params).expect("parameters serialize");
    lines.extend(body.lines().map(str::to_string));
    lines
}
