//! Pixel-level operations shared by the degradations.

use crate::bbox::BBox;
use crate::error::{DegradeError, Result};
use crate::image_buf::Image;

/// Bilinear sample at continuous `(x, y)`; integer coordinates land exactly
/// on pixel centers and out-of-range coordinates clamp to the border.
pub fn bilinear_sample(img: &Image, x: f32, y: f32, out: &mut [f32]) {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let clamp = |v: isize, hi: isize| v.clamp(0, hi - 1) as usize;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (ix0, iy0) = (x0 as isize, y0 as isize);
    let p00 = img.pixel(clamp(iy0, h), clamp(ix0, w));
    let p01 = img.pixel(clamp(iy0, h), clamp(ix0 + 1, w));
    let p10 = img.pixel(clamp(iy0 + 1, h), clamp(ix0, w));
    let p11 = img.pixel(clamp(iy0 + 1, h), clamp(ix0 + 1, w));
    for ch in 0..out.len() {
        let top = p00[ch] + (p01[ch] - p00[ch]) * fx;
        let bot = p10[ch] + (p11[ch] - p10[ch]) * fx;
        out[ch] = top + (bot - top) * fy;
    }
}

/// Resamples the box region to a square `out_side` view (half-pixel-center
/// mapping, so a box whose size already equals `out_side` copies exactly).
pub fn crop_to_box(img: &Image, bbox: &BBox, out_side: usize) -> Result<Image> {
    let b = bbox.clamped(img.width(), img.height());
    if b.is_empty() {
        return Err(DegradeError::Contract(format!(
            "box {bbox:?} is empty after clamping to {}x{}",
            img.width(),
            img.height()
        )));
    }
    if out_side == 0 {
        return Err(DegradeError::Contract("crop size must be positive".into()));
    }
    let c = img.channels();
    let mut out = Image::zeros(out_side, out_side, c);
    let sx = b.width() / out_side as f32;
    let sy = b.height() / out_side as f32;
    let mut px = vec![0.0f32; c];
    for oy in 0..out_side {
        let y = b.y0 + (oy as f32 + 0.5) * sy - 0.5;
        for ox in 0..out_side {
            let x = b.x0 + (ox as f32 + 0.5) * sx - 0.5;
            bilinear_sample(img, x, y, &mut px);
            for (ch, &v) in px.iter().enumerate() {
                out.set(oy, ox, ch, v);
            }
        }
    }
    Ok(out)
}

/// Partition of `n` source pixels into `cells` equal intervals: for each
/// pixel, the (cell, overlap length) pairs it contributes to. A pixel spans
/// at most two cells, so the inner vectors hold one or two entries.
fn overlap_spans(n: usize, cells: usize) -> Vec<Vec<(usize, f64)>> {
    let step = n as f64 / cells as f64;
    (0..n)
        .map(|p| {
            let (a, b) = (p as f64, p as f64 + 1.0);
            let lo = ((a / step) as usize).min(cells - 1);
            let hi = (((b - 1e-9) / step) as usize).min(cells - 1);
            (lo..=hi)
                .map(|i| {
                    let (ca, cb) = (i as f64 * step, (i + 1) as f64 * step);
                    (i, (b.min(cb) - a.max(ca)).max(0.0))
                })
                .collect()
        })
        .collect()
}

/// Destroys high-frequency detail: exact area-average downsample to `s`x`s`,
/// then nearest-neighbor upsample back to the original size. Nearest rather
/// than bilinear re-expansion keeps the reduction idempotent: every pixel of
/// a cell carries the cell mean, so a second pass recomputes the same means.
pub fn lowres(img: &Image, s: usize) -> Result<Image> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if s < 2 || s > h.min(w) {
        return Err(DegradeError::Contract(format!(
            "lowres target {s} outside 2..={}",
            h.min(w)
        )));
    }
    let rows = overlap_spans(h, s);
    let cols = overlap_spans(w, s);
    let mut sums = vec![0.0f64; s * s * c];
    for y in 0..h {
        for x in 0..w {
            let px = img.pixel(y, x);
            for &(iy, wy) in &rows[y] {
                for &(ix, wx) in &cols[x] {
                    let base = (iy * s + ix) * c;
                    for (ch, &v) in px.iter().enumerate() {
                        sums[base + ch] += v as f64 * wy * wx;
                    }
                }
            }
        }
    }
    let cell_area = (h as f64 / s as f64) * (w as f64 / s as f64);
    let (step_y, step_x) = (h as f64 / s as f64, w as f64 / s as f64);
    let mut out = Image::zeros(h, w, c);
    for y in 0..h {
        let iy = (((y as f64 + 0.5) / step_y) as usize).min(s - 1);
        for x in 0..w {
            let ix = (((x as f64 + 0.5) / step_x) as usize).min(s - 1);
            let base = (iy * s + ix) * c;
            for ch in 0..c {
                out.set(y, x, ch, (sums[base + ch] / cell_area) as f32);
            }
        }
    }
    Ok(out)
}

/// Gradient-magnitude edge image: channel-mean gray, central differences
/// with replicated borders, L2 magnitude, normalized by the 99th percentile
/// and clipped to [0, 1]. The result is replicated to the input channel
/// count so downstream consumers see the same shape.
pub fn edge_map(img: &Image) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut gray = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let px = img.pixel(y, x);
            let s: f64 = px.iter().map(|&v| v as f64).sum();
            gray[y * w + x] = (s / c as f64) as f32;
        }
    }
    let g = |y: usize, x: usize| gray[y * w + x];
    let mut mag = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let gx = (g(y, (x + 1).min(w - 1)) - g(y, x.saturating_sub(1))) * 0.5;
            let gy = (g((y + 1).min(h - 1), x) - g(y.saturating_sub(1), x)) * 0.5;
            mag[y * w + x] = (gx * gx + gy * gy).sqrt();
        }
    }
    let mut sorted = mag.clone();
    sorted.sort_by(f32::total_cmp);
    let p99 = sorted[(((sorted.len() - 1) as f64) * 0.99).round() as usize];
    let peak = *sorted.last().expect("non-empty image");
    let scale = if p99 > 1e-12 {
        1.0 / p99
    } else if peak > 0.0 {
        1.0 / peak
    } else {
        0.0
    };
    let mut out = Image::zeros(h, w, c);
    for (i, &m) in mag.iter().enumerate() {
        let v = (m * scale).clamp(0.0, 1.0);
        for ch in 0..c {
            out.data_mut()[i * c + ch] = v;
        }
    }
    out
}
