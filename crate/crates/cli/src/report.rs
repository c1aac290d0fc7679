//! Machine-readable outputs: metric JSON and run manifests.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mlt_core::metrics::MetricsReport;
use mlt_core::Task;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};

/// The metric JSON every command emits. Contains nothing that varies
/// between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub task: Task,
    pub mode: Mode,
    /// Which data the metrics were computed on.
    pub split: String,
    pub seed: u64,
    pub config_digest: String,
    pub metrics: MetricsReport,
}

impl MetricsFile {
    pub fn new(cfg: &ExperimentConfig, split: &str, metrics: MetricsReport) -> Self {
        MetricsFile {
            task: cfg.task,
            mode: cfg.mode,
            split: split.to_string(),
            seed: cfg.seed,
            config_digest: cfg.digest(),
            metrics,
        }
    }
}

/// Everything needed to audit or repeat one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Pairs used to code-switch the training data, empty in base mode.
    pub pairs: Vec<(String, String)>,
    /// Mean training loss per epoch of the final model.
    pub losses: Vec<f64>,
    /// Loss trace of the automatic BASE phase, if one ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_losses: Option<Vec<f64>>,
    pub metrics: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_metrics: Option<MetricsReport>,
    pub wall_clock_secs: f64,
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::file(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
