//! Synthetic fine-grained shape scenes.
//!
//! Every image shows one striped object on a dark noisy background among
//! clutter primitives. The class determines only:
//!
//! * silhouette (square or disc),
//! * stripe orientation (horizontal or vertical),
//! * stripe width (fine or coarse),
//! * a small bright rim dot sitting above or below the object center.
//!
//! Stripe colors, object size, position, rotation jitter, stripe phase, and
//! all clutter are sampled independently of the label, so none of them leak
//! class identity. Bounding boxes are the exact extent of painted object
//! pixels.

use crate::error::{DataError, Result};
use cqd_degrade::io::LabeledSample;
use cqd_degrade::{BBox, Image};
use cqd_tensor::rng::{derive_seed, seeded_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Saturated colors of similar luminance; stripe pairs are drawn from here
/// for objects and clutter alike.
const PALETTE: [[f32; 3]; 6] = [
    [0.85, 0.20, 0.20],
    [0.20, 0.78, 0.20],
    [0.25, 0.35, 0.90],
    [0.82, 0.78, 0.20],
    [0.80, 0.25, 0.80],
    [0.20, 0.78, 0.78],
];

/// Index of the palette color farthest from `i`: red-cyan, green-magenta,
/// blue-yellow. The palette is laid out so partners mirror around the middle.
fn opposing(i: usize) -> usize {
    PALETTE.len() - 1 - i
}

/// Near-white, used nowhere else so the marker stays findable in clutter.
const DOT_COLOR: [f32; 3] = [0.97, 0.97, 0.97];
const MAX_CLASSES: usize = 16;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub num_classes: usize,
    pub per_class: usize,
    /// Square image side in pixels.
    pub side: usize,
    pub seed: u64,
    /// Inclusive range for the number of clutter primitives per scene.
    pub clutter: (usize, usize),
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            per_class: 100,
            side: 64,
            seed: 0,
            clutter: (4, 7),
        }
    }
}

struct ClassAttrs {
    /// Disc silhouette when set, square otherwise.
    round: bool,
    vertical: bool,
    coarse: bool,
    dot_top: bool,
}

fn class_attrs(label: usize) -> ClassAttrs {
    ClassAttrs {
        round: label & 0b1000 != 0,
        vertical: label & 0b0100 != 0,
        coarse: label & 0b0010 != 0,
        dot_top: label & 0b0001 == 0,
    }
}

pub fn class_names(num_classes: usize) -> Vec<String> {
    (0..num_classes)
        .map(|k| {
            let a = class_attrs(k);
            format!(
                "{}{}-{}-{}",
                if a.round { "rnd" } else { "sq" },
                if a.vertical { "v" } else { "h" },
                if a.coarse { "coarse" } else { "fine" },
                if a.dot_top { "top" } else { "bot" }
            )
        })
        .collect()
}

struct BoxTracker {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    any: bool,
}

impl BoxTracker {
    fn new() -> Self {
        Self {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
            any: false,
        }
    }

    fn cover(&mut self, y: usize, x: usize) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x + 1);
        self.y1 = self.y1.max(y + 1);
        self.any = true;
    }

    fn bbox(&self) -> Option<BBox> {
        self.any.then(|| {
            BBox::new(
                self.x0 as f32,
                self.y0 as f32,
                self.x1 as f32,
                self.y1 as f32,
            )
        })
    }
}

fn set_px(img: &mut Image, y: usize, x: usize, color: [f32; 3]) {
    for (ch, &v) in color.iter().enumerate() {
        img.set(y, x, ch, v);
    }
}

/// Inside test for the convex regular polygon with the given vertices.
fn inside_polygon(verts: &[(f32, f32)], x: f32, y: f32) -> bool {
    let n = verts.len();
    for i in 0..n {
        let (x0, y0) = verts[i];
        let (x1, y1) = verts[(i + 1) % n];
        if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < 0.0 {
            return false;
        }
    }
    true
}

/// Distance from the polygon center to its boundary along the vertical ray
/// with direction `dir` (+1 down, -1 up). Convexity makes bisection exact
/// enough: `r + 1` is always outside, the center is always inside.
fn rim_distance(verts: &[(f32, f32)], cx: f32, cy: f32, dir: f32, r: f32) -> f32 {
    let (mut lo, mut hi) = (0.0f32, r + 1.0);
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if inside_polygon(verts, cx, cy + dir * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn polygon_vertices(cx: f32, cy: f32, r: f32, sides: usize, rot: f32) -> Vec<(f32, f32)> {
    (0..sides)
        .map(|i| {
            let a = rot + i as f32 * std::f32::consts::TAU / sides as f32;
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn draw_polygon<F>(
    img: &mut Image,
    verts: &[(f32, f32)],
    mut paint: F,
    mask: Option<&mut Vec<bool>>,
    tracker: Option<&mut BoxTracker>,
) where
    F: FnMut(usize, usize) -> [f32; 3],
{
    let side = img.height();
    let min_x = verts.iter().map(|v| v.0).fold(f32::INFINITY, f32::min);
    let max_x = verts.iter().map(|v| v.0).fold(f32::NEG_INFINITY, f32::max);
    let min_y = verts.iter().map(|v| v.1).fold(f32::INFINITY, f32::min);
    let max_y = verts.iter().map(|v| v.1).fold(f32::NEG_INFINITY, f32::max);
    let lo = |v: f32| (v.floor().max(0.0)) as usize;
    let hi = |v: f32| (v.ceil().min(side as f32 - 1.0)) as usize;
    let mut mask = mask;
    let mut tracker = tracker;
    for y in lo(min_y)..=hi(max_y) {
        for x in lo(min_x)..=hi(max_x) {
            if inside_polygon(verts, x as f32, y as f32) {
                set_px(img, y, x, paint(y, x));
                if let Some(m) = mask.as_deref_mut() {
                    m[y * side + x] = true;
                }
                if let Some(t) = tracker.as_deref_mut() {
                    t.cover(y, x);
                }
            }
        }
    }
}

fn draw_disc(
    img: &mut Image,
    cx: f32,
    cy: f32,
    r: f32,
    color: [f32; 3],
    mut mask: Option<&mut Vec<bool>>,
    mut tracker: Option<&mut BoxTracker>,
) {
    let side = img.height();
    let lo = |v: f32| (v.floor().max(0.0)) as usize;
    let hi = |v: f32| (v.ceil().min(side as f32 - 1.0)) as usize;
    for y in lo(cy - r)..=hi(cy + r) {
        for x in lo(cx - r)..=hi(cx + r) {
            let (dx, dy) = (x as f32 - cx, y as f32 - cy);
            if dx * dx + dy * dy <= r * r {
                set_px(img, y, x, color);
                if let Some(m) = mask.as_deref_mut() {
                    m[y * side + x] = true;
                }
                if let Some(t) = tracker.as_deref_mut() {
                    t.cover(y, x);
                }
            }
        }
    }
}

/// One rendered scene plus the exact mask of object pixels (for tests).
pub(crate) fn render_scene(
    cfg: &GenConfig,
    label: usize,
    rng: &mut ChaCha8Rng,
) -> (Image, BBox, Vec<bool>) {
    let side = cfg.side;
    let sf = side as f32;
    let attrs = class_attrs(label);

    // background: dark gray with light per-channel noise
    let mut img = Image::zeros(side, side, 3);
    for v in img.data_mut().iter_mut() {
        *v = 0.15 + rng.random_range(-0.04..0.04);
    }

    // object geometry first so clutter can stay clear of it; the disc gets a
    // smaller circumradius so both silhouettes cover a similar pixel area
    let radius = if attrs.round {
        rng.random_range(0.23 * sf..0.29 * sf)
    } else {
        rng.random_range(0.26 * sf..0.33 * sf)
    };
    let cx = rng.random_range(0.35 * sf..0.65 * sf);
    let cy = rng.random_range(0.35 * sf..0.65 * sf);
    // jitter, not free rotation: the square should stay visibly cornered
    let rot = rng.random_range(-0.18..0.18f32);

    // stripe pair: a palette color and its fixed opposing partner, so every
    // texture has full contrast in at least two channels; which of the three
    // pairs appears stays label-independent
    let i1 = rng.random_range(0..PALETTE.len());
    let c1 = PALETTE[i1];
    let c2 = PALETTE[opposing(i1)];
    // The smallest object diameter is 0.46*sf, so a coarse period of
    // 2*7 = 14 px (at sf = 64) always fits at least two full periods:
    // width must stay readable on every draw or the class is ambiguous.
    let stripe_w = if attrs.coarse {
        (sf * 7.0 / 64.0).round()
    } else {
        (sf * 3.0 / 64.0).round()
    }
    .max(2.0);
    let phase = rng.random_range(0.0..2.0 * stripe_w);

    // clutter: same palette, kept off the object's circumcircle
    let n_clutter = rng.random_range(cfg.clutter.0..=cfg.clutter.1);
    for _ in 0..n_clutter {
        let r = rng.random_range(0.06 * sf..0.14 * sf);
        let color = PALETTE[rng.random_range(0..PALETTE.len())];
        let kind = rng.random_range(0..3u32);
        let mut placed = None;
        for _ in 0..25 {
            let x = rng.random_range(0.0..sf);
            let y = rng.random_range(0.0..sf);
            let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            let min_d = radius + r + 0.03 * sf;
            if d2 > min_d * min_d {
                placed = Some((x, y));
                break;
            }
        }
        let Some((x, y)) = placed else { continue };
        match kind {
            0 => draw_disc(&mut img, x, y, r, color, None, None),
            k => {
                let spin = rng.random_range(0.0..std::f32::consts::TAU);
                let verts = polygon_vertices(x, y, r, if k == 1 { 3 } else { 4 }, spin);
                draw_polygon(&mut img, &verts, |_, _| color, None, None);
            }
        }
    }

    // the object: striped silhouette with its rim dot; the disc is a 32-gon,
    // indistinguishable from a circle at these radii
    let mut mask = vec![false; side * side];
    let mut tracker = BoxTracker::new();
    let sides = if attrs.round { 32 } else { 4 };
    let verts = polygon_vertices(cx, cy, radius, sides, rot);
    draw_polygon(
        &mut img,
        &verts,
        |y, x| {
            let u = if attrs.vertical {
                x as f32 - cx
            } else {
                y as f32 - cy
            };
            let band = ((u + phase).div_euclid(stripe_w)) as i64;
            if band.rem_euclid(2) == 0 {
                c1
            } else {
                c2
            }
        },
        Some(&mut mask),
        Some(&mut tracker),
    );
    let dot_dir = if attrs.dot_top { -1.0 } else { 1.0 };
    let dot_r = 0.08 * sf;
    // straddle the silhouette so the dot reads as a rim marker whether the
    // vertical ray meets an edge or a corner
    let rim = rim_distance(&verts, cx, cy, dot_dir, radius);
    draw_disc(
        &mut img,
        cx,
        cy + dot_dir * rim,
        dot_r,
        DOT_COLOR,
        Some(&mut mask),
        Some(&mut tracker),
    );

    let bbox = tracker.bbox().expect("object always paints pixels");
    (img, bbox, mask)
}

/// Class-major dataset; sample `i` of class `k` draws from the stream
/// `derive_seed(seed, k * per_class + i)` regardless of the other samples.
pub fn generate_dataset(cfg: &GenConfig) -> Result<(Vec<String>, Vec<LabeledSample>)> {
    if cfg.num_classes < 2 || cfg.num_classes > MAX_CLASSES {
        return Err(DataError::Contract(format!(
            "num_classes {} outside 2..={MAX_CLASSES}",
            cfg.num_classes
        )));
    }
    if cfg.per_class == 0 {
        return Err(DataError::Contract("per_class must be positive".into()));
    }
    if cfg.side < 32 {
        return Err(DataError::Contract(format!(
            "side {} too small; the rim dot would not survive rendering",
            cfg.side
        )));
    }
    if cfg.clutter.0 > cfg.clutter.1 {
        return Err(DataError::Contract(format!(
            "clutter range {:?} is inverted",
            cfg.clutter
        )));
    }
    let mut samples = Vec::with_capacity(cfg.num_classes * cfg.per_class);
    for label in 0..cfg.num_classes {
        for i in 0..cfg.per_class {
            let global = (label * cfg.per_class + i) as u64;
            let mut rng = seeded_rng(derive_seed(cfg.seed, global));
            let (image, bbox, _) = render_scene(cfg, label, &mut rng);
            samples.push(LabeledSample {
                id: format!("c{label:02}s{i:04}"),
                label: label as u32,
                bbox: Some(bbox),
                image,
            });
        }
    }
    Ok((class_names(cfg.num_classes), samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> GenConfig {
        GenConfig {
            num_classes: 4,
            per_class: 3,
            side: 64,
            seed: 11,
            clutter: (3, 5),
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (_, a) = generate_dataset(&small_cfg()).unwrap();
        let (_, b) = generate_dataset(&small_cfg()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image.data(), y.image.data());
            assert_eq!(x.bbox, y.bbox);
        }
        let mut cfg = small_cfg();
        cfg.seed = 12;
        let (_, c) = generate_dataset(&cfg).unwrap();
        assert_ne!(a[0].image.data(), c[0].image.data());
    }

    #[test]
    fn boxes_are_exact_object_extent() {
        let cfg = small_cfg();
        for label in 0..cfg.num_classes {
            for i in 0..8u64 {
                let mut rng = seeded_rng(derive_seed(cfg.seed, 1000 + i));
                let (_, bbox, mask) = render_scene(&cfg, label, &mut rng);
                let mut t = BoxTracker::new();
                for y in 0..cfg.side {
                    for x in 0..cfg.side {
                        if mask[y * cfg.side + x] {
                            t.cover(y, x);
                        }
                    }
                }
                assert_eq!(t.bbox().unwrap(), bbox);
                assert!(bbox.x1 <= cfg.side as f32 && bbox.y1 <= cfg.side as f32);
                assert!(bbox.area() > 0.05 * (cfg.side * cfg.side) as f32);
            }
        }
    }

    #[test]
    fn nuisance_factors_vary_within_a_class() {
        let cfg = small_cfg();
        let mut areas = std::collections::HashSet::new();
        let mut first_pixels = std::collections::HashSet::new();
        for i in 0..24u64 {
            let mut rng = seeded_rng(derive_seed(cfg.seed, i));
            let (img, bbox, mask) = render_scene(&cfg, 0, &mut rng);
            areas.insert(bbox.area() as u32);
            // bbox center lies inside the convex object, away from the marker dot
            let cy = ((bbox.y0 + bbox.y1) / 2.0) as usize;
            let cx = ((bbox.x0 + bbox.x1) / 2.0) as usize;
            assert!(mask[cy * cfg.side + cx]);
            let px = img.pixel(cy, cx);
            first_pixels.insert(format!("{:.2}-{:.2}-{:.2}", px[0], px[1], px[2]));
        }
        assert!(areas.len() > 8, "sizes should vary: {areas:?}");
        assert!(first_pixels.len() > 3, "colors should vary");
    }

    #[test]
    fn class_names_are_unique_and_stable() {
        let names = class_names(16);
        let set: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(set.len(), 16);
        assert_eq!(names[0], "sqh-fine-top");
        assert_eq!(names[15], "rndv-coarse-bot");
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small_cfg();
        cfg.num_classes = 1;
        assert!(generate_dataset(&cfg).is_err());
        let mut cfg = small_cfg();
        cfg.num_classes = 17;
        assert!(generate_dataset(&cfg).is_err());
        let mut cfg = small_cfg();
        cfg.side = 16;
        assert!(generate_dataset(&cfg).is_err());
        let mut cfg = small_cfg();
        cfg.clutter = (5, 2);
        assert!(generate_dataset(&cfg).is_err());
    }
}
