//! Small convolutional classifiers and their on-disk checkpoint format.
//!
//! Two preset architectures share one building-block vocabulary: a stack of
//! conv/bias/relu blocks with optional max pooling, then a two-layer
//! classifier head. The `deep` preset has strictly more parameters and
//! arithmetic than `shallow` at every input size, so capacity comparisons
//! between the two are meaningful.

pub mod arch;
pub mod checkpoint;
pub mod error;
pub mod model;

pub use arch::{ArchSpec, ConvBlock};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use error::NetError;
pub use model::{argmax_rows, Model};
