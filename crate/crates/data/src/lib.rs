//! Dataset construction: a synthetic fine-grained shape generator,
//! stratified splitting, and import/export of image folders with CSV labels.
//!
//! The generator is built so that class identity lives in small visual
//! details (stripe texture, side count, a rim marker) while nuisance factors
//! (color pair, size, position, clutter) are drawn independently of the
//! label. Quality degradations therefore remove real class information
//! instead of incidental correlations.

pub mod csvio;
pub mod error;
pub mod gen;
pub mod split;

pub use error::DataError;
pub use gen::{generate_dataset, GenConfig};
pub use split::{stratified_split, Split};
