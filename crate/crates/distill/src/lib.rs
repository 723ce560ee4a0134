//! Cross-quality training methods.
//!
//! A paired dataset supplies a high-quality and a low-quality view of each
//! sample. The methods here train a classifier for the low-quality domain
//! in five ways, from ignoring the problem to distilling a teacher's
//! high-quality predictions into the student on a per-sample basis.

pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod methods;
pub mod report;
mod trainer;

pub use config::{Loss2Kind, MethodKind, TrainConfig, WarmStart};
pub use data::{PairedSet, TrainData, View};
pub use error::DistillError;
pub use losses::{distill_loss, smooth, smooth_logits};
pub use methods::{method_by_name, method_for, train, TrainMethod, METHODS};
pub use report::{EpochStats, TrainReport, REPORT_SCHEMA_VERSION};
pub use trainer::evaluate;
