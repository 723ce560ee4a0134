//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Everything is owned `f32` in row-major order. A [`Graph`] is a flat tape:
//! operations execute eagerly and record enough context to replay the exact
//! reverse pass. Loss reductions accumulate in `f64` so that downstream
//! finite-difference checks are not drowned by summation noise.
//!
//! The engine is deliberately single-threaded per graph; determinism per seed
//! is part of its contract.

pub mod error;
pub mod graph;
pub mod ops;
pub mod rng;
pub mod schedule;
pub mod sgd;
pub mod tensor;

pub use error::TensorError;
pub use graph::{Graph, Var};
pub use schedule::lr_at;
pub use sgd::SgdState;
pub use tensor::Tensor;

/// Probabilities are clamped to this floor before any `log`.
pub const PROB_EPS: f32 = 1e-12;
