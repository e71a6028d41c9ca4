use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::pipeline::config::RunConfig;

/// Deterministic per-stage summaries. Wall-clock timings deliberately stay out
/// of the report so reruns are byte-identical.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageArtifacts {
    pub n_train: usize,
    pub n_valid: usize,
    pub union_size: Option<usize>,
    pub critic_final_losses: Vec<f64>,
    pub actor_mean_reward_per_epoch: Vec<f64>,
    pub final_train_loss: Vec<f64>,
}

/// The full run record: config echo, stage summaries, validation metrics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub stages: StageArtifacts,
    pub metrics: MetricReport,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<RunReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Canonical metric JSON used for reproducibility comparison.
    pub fn metric_json(&self) -> String {
        serde_json::to_string_pretty(&self.metrics).expect("metrics serialize")
    }
}
