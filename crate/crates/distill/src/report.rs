//! Serialized artifacts of a training run.

use crate::config::TrainConfig;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    /// 0 for single-phase methods; a staged run reports 0 then 1.
    pub phase: u32,
    /// Epoch index within its phase.
    pub epoch: u32,
    pub lr: f32,
    /// Sample-mean label loss over the epoch.
    pub task_loss: f64,
    /// Sample-mean teacher-matching loss before weighting; 0 when the
    /// method has no matching term.
    pub distill_loss: f64,
    pub eval_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    /// Registry name of the method that produced this run.
    pub method: String,
    pub config: TrainConfig,
    pub seed: u64,
    pub epochs: Vec<EpochStats>,
    pub final_accuracy: Option<f64>,
    pub wall_time_secs: f64,
}

impl TrainReport {
    pub fn new(method: &str, config: &TrainConfig) -> Self {
        TrainReport {
            schema_version: REPORT_SCHEMA_VERSION,
            method: method.to_string(),
            config: config.clone(),
            seed: config.seed,
            epochs: Vec::new(),
            final_accuracy: None,
            wall_time_secs: 0.0,
        }
    }
}
