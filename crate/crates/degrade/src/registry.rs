//! The degradation strategy family.
//!
//! Each transform implements [`Degradation`] and appears in [`REGISTRY`]
//! under a stable name; configs and CLI flags pick one by that name and the
//! parameterized [`TransformDescriptor`] is stored in dataset manifests so a
//! dataset always knows how it was made.

use crate::bbox::BBox;
use crate::error::{DegradeError, Result};
use crate::image_buf::Image;
use crate::ops::{crop_to_box, edge_map, lowres};
use crate::tps::tps_warp;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What the teacher sees (`hq`) and what the student sees (`lq`).
pub struct PairedViews {
    pub hq: Image,
    pub lq: Image,
}

pub trait Degradation: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether samples without a bounding box must be skipped.
    fn needs_box(&self) -> bool {
        false
    }
    fn make_views(
        &self,
        img: &Image,
        bbox: Option<&BBox>,
        rng: &mut ChaCha8Rng,
    ) -> Result<PairedViews>;
}

/// Parameterized, serializable description of a degradation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformDescriptor {
    /// Both views are the unmodified image.
    Identity,
    /// HQ is the ground-truth box resampled to full size; LQ is the scene.
    Localize,
    /// LQ is area-averaged down to `size`x`size` and re-expanded.
    Lowres { size: usize },
    /// LQ is a normalized gradient-magnitude image.
    EdgeMap,
    /// LQ is warped by a TPS with `grid^2` control points jittered by a
    /// Gaussian of stddev `displacement * side / 224` pixels.
    TpsDistort { grid: usize, displacement: f32 },
    /// HQ as in `Localize`, LQ as in `Lowres` applied to the full scene.
    LocalizeLowres { size: usize },
}

pub struct RegistryEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub default_descriptor: fn() -> TransformDescriptor,
}

pub const REGISTRY: &[RegistryEntry] = &[
    RegistryEntry {
        name: "identity",
        summary: "no degradation; hq == lq",
        default_descriptor: || TransformDescriptor::Identity,
    },
    RegistryEntry {
        name: "localize",
        summary: "hq is the object crop, lq the full cluttered scene",
        default_descriptor: || TransformDescriptor::Localize,
    },
    RegistryEntry {
        name: "lowres",
        summary: "lq is area-averaged down to a coarser resolution",
        default_descriptor: || TransformDescriptor::Lowres { size: 16 },
    },
    RegistryEntry {
        name: "edges",
        summary: "lq keeps only normalized edge magnitudes",
        default_descriptor: || TransformDescriptor::EdgeMap,
    },
    RegistryEntry {
        name: "tps",
        summary: "lq is warped by a random thin-plate spline",
        default_descriptor: || TransformDescriptor::TpsDistort {
            grid: 7,
            displacement: 4.0,
        },
    },
    RegistryEntry {
        name: "localize-lowres",
        summary: "hq is the object crop, lq the coarsened full scene",
        default_descriptor: || TransformDescriptor::LocalizeLowres { size: 16 },
    },
];

pub fn default_descriptor(name: &str) -> Result<TransformDescriptor> {
    REGISTRY
        .iter()
        .find(|e| e.name == name)
        .map(|e| (e.default_descriptor)())
        .ok_or_else(|| {
            let known: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
            DegradeError::Contract(format!(
                "unknown transform {name:?}; known: {}",
                known.join(", ")
            ))
        })
}

impl TransformDescriptor {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Localize => "localize",
            Self::Lowres { .. } => "lowres",
            Self::EdgeMap => "edges",
            Self::TpsDistort { .. } => "tps",
            Self::LocalizeLowres { .. } => "localize-lowres",
        }
    }

    pub fn build(&self) -> Box<dyn Degradation> {
        match *self {
            Self::Identity => Box::new(IdentityView),
            Self::Localize => Box::new(LocalizeView),
            Self::Lowres { size } => Box::new(LowresView { size }),
            Self::EdgeMap => Box::new(EdgeMapView),
            Self::TpsDistort { grid, displacement } => {
                Box::new(TpsDistortView { grid, displacement })
            }
            Self::LocalizeLowres { size } => Box::new(LocalizeLowresView { size }),
        }
    }
}

struct IdentityView;

impl Degradation for IdentityView {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn make_views(&self, img: &Image, _: Option<&BBox>, _: &mut ChaCha8Rng) -> Result<PairedViews> {
        Ok(PairedViews {
            hq: img.clone(),
            lq: img.clone(),
        })
    }
}

fn crop_view(img: &Image, bbox: Option<&BBox>) -> Result<Image> {
    let b = bbox.ok_or_else(|| DegradeError::MissingBox { id: String::new() })?;
    crop_to_box(img, b, img.height())
}

struct LocalizeView;

impl Degradation for LocalizeView {
    fn name(&self) -> &'static str {
        "localize"
    }

    fn needs_box(&self) -> bool {
        true
    }

    fn make_views(
        &self,
        img: &Image,
        bbox: Option<&BBox>,
        _: &mut ChaCha8Rng,
    ) -> Result<PairedViews> {
        Ok(PairedViews {
            hq: crop_view(img, bbox)?,
            lq: img.clone(),
        })
    }
}

struct LowresView {
    scale: usize,
}

impl Degradation for LowresView {
    fn name(&self) -> &'static str {
        "lowres"
    }

    fn make_views(&self, img: &Image, _: Option<&BBox>, _: &mut ChaCha8Rng) -> Result<PairedViews> {
        Ok(PairedViews {
            hq: img.clone(),
            lq: lowres(img, self.scale)?,
        })
    }
}

struct EdgeMapView;

impl Degradation for EdgeMapView {
    fn name(&self) -> &'static str {
        "edges"
    }

    fn make_views(&self, img: &Image, _: Option<&BBox>, _: &mut ChaCha8Rng) -> Result<PairedViews> {
        Ok(PairedViews {
            hq: img.clone(),
            lq: edge_map(img),
        })
    }
}

struct TpsDistortView {
    grid: usize,
    displacement: f32,
}

impl Degradation for TpsDistortView {
    fn name(&self) -> &'static str {
        "tps"
    }

    fn make_views(
        &self,
        img: &Image,
        _: Option<&BBox>,
        rng: &mut ChaCha8Rng,
    ) -> Result<PairedViews> {
        let sigma = self.displacement * img.height() as f32 / 224.0;
        Ok(PairedViews {
            hq: img.clone(),
            lq: tps_warp(img, self.grid, sigma, rng)?,
        })
    }
}

struct LocalizeLowresView {
    scale: usize,
}

impl Degradation for LocalizeLowresView {
    fn name(&self) -> &'static str {
        "localize-lowres"
    }

    fn needs_box(&self) -> bool {
        true
    }

    fn make_views(
        &self,
        img: &Image,
        bbox: Option<&BBox>,
        _: &mut ChaCha8Rng,
    ) -> Result<PairedViews> {
        Ok(PairedViews {
            hq: crop_view(img, bbox)?,
            lq: lowres(img, self.scale)?,
        })
    }
}
