//! Image views, quality degradations, and dataset storage.
//!
//! A degradation turns one labeled image into a pair of views: a high-quality
//! view the teacher sees and a low-quality view the student sees. Every
//! degradation sits behind the [`Degradation`] trait and is registered by
//! name, so configs and the CLI select them at runtime; the serialized
//! [`TransformDescriptor`] travels with each dataset manifest.

pub mod bbox;
pub mod error;
pub mod image_buf;
pub mod io;
pub mod ops;
pub mod registry;
pub mod tps;

pub use bbox::BBox;
pub use error::DegradeError;
pub use image_buf::Image;
pub use registry::{Degradation, PairedViews, TransformDescriptor, REGISTRY};
