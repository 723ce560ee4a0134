//! Model inspection: input-gradient saliency and the localization fraction τ.
//!
//! τ measures how much of a model's input gradient falls inside the object's
//! bounding box. Comparing τ between a distilled student and a plain
//! low-quality baseline shows whether distillation taught the student where
//! to look, not just what to answer.

pub mod error;
pub mod saliency;
pub mod tau;

pub use error::AnalysisError;
pub use saliency::{input_gradient, pixel_grad_norm, Saliency, SaliencySource};
pub use tau::{
    read_scatter_csv, summarize, tau, tau_scatter, write_scatter_csv, write_summary_json,
    ScatterOutcome, Skip, TauItem, TauRecord, TauSummary,
};
