//! Run configuration shared by all training methods.

use crate::error::{DistillError, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Which training strategy to run. Every variant is also registered under
/// the same name in [`crate::methods::METHODS`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    /// Supervised training on the high-quality view only.
    Hq,
    /// Supervised training on the low-quality view only.
    Lq,
    /// Supervised training on both views shuffled together.
    Both,
    /// Train on the high-quality view, then continue on the low-quality one.
    Staged,
    /// Distill a high-quality teacher into a low-quality student.
    Distill,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Hq => "hq",
            MethodKind::Lq => "lq",
            MethodKind::Both => "both",
            MethodKind::Staged => "staged",
            MethodKind::Distill => "distill",
        }
    }
}

/// Form of the teacher-matching term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss2Kind {
    /// Cross-entropy between temperature-smoothed class distributions.
    SmoothedCe,
    /// Mean squared difference of raw logits; ignores the temperature.
    SquaredLogits,
}

/// Student initialization for the distillation method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Copy the teacher when the architectures match, otherwise start fresh.
    Auto,
    /// Copy the teacher; error if the architectures differ.
    FromTeacher,
    /// Always initialize from the seed.
    Fresh,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: MethodKind,
    /// Weight of the teacher-matching term relative to the label term.
    /// The healthy range scales inversely with the learning rate: the matching
    /// gradient is proportional to lambda / temperature, so at lr_start 0.02 a
    /// lambda near 1 keeps parameter steps in the same regime as the label term.
    pub lambda: f64,
    /// Smoothing temperature; 1 leaves distributions unchanged.
    pub temperature: f64,
    pub loss2_kind: Loss2Kind,
    pub lr_start: f32,
    pub lr_end: f32,
    /// Epoch count over which the rate anneals; frozen at `lr_end` after.
    pub schedule_epochs: u32,
    pub total_epochs: u32,
    /// Budget for the first phase of `staged` when no teacher is supplied;
    /// defaults to `total_epochs`.
    pub stage_one_epochs: Option<u32>,
    pub momentum: f32,
    pub weight_decay: f32,
    pub batch_size: usize,
    pub seed: u64,
    pub teacher_checkpoint: Option<PathBuf>,
    pub student_arch: String,
    pub teacher_arch: String,
    pub warm_start: WarmStart,
    /// Give each view its own classifier rows in `both`; off by default so
    /// the two views share one head.
    pub separate_heads: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: MethodKind::Distill,
            lambda: 1.0,
            temperature: 10.0,
            loss2_kind: Loss2Kind::SmoothedCe,
            lr_start: 0.02,
            lr_end: 0.002,
            schedule_epochs: 30,
            total_epochs: 30,
            stage_one_epochs: None,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 16,
            seed: 0,
            teacher_checkpoint: None,
            student_arch: "shallow".into(),
            teacher_arch: "shallow".into(),
            warm_start: WarmStart::Auto,
            separate_heads: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DistillError::Config(msg));
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad(format!(
                "temperature must be positive, got {}",
                self.temperature
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        for (name, v) in [("lr_start", self.lr_start), ("lr_end", self.lr_end)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.schedule_epochs == 0 {
            return bad("schedule_epochs must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(back.method, cfg.method);
        assert_eq!(back.lambda, cfg.lambda);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"method":"staged","seed":7}"#).unwrap();
        assert_eq!(cfg.method, MethodKind::Staged);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.total_epochs, 30);
        assert_eq!(cfg.loss2_kind, Loss2Kind::SmoothedCe);
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let bad = [
            TrainConfig {
                temperature: 0.0,
                ..Default::default()
            },
            TrainConfig {
                lambda: -1.0,
                ..Default::default()
            },
            TrainConfig {
                momentum: 1.0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                lr_start: f32::NAN,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
