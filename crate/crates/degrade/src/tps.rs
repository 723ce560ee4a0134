//! Thin-plate-spline image warping.
//!
//! A `grid x grid` lattice of control points maps output coordinates to
//! jittered input coordinates (backward warping), with the classic kernel
//! `U(r) = r^2 ln r` and no smoothing: the fitted spline interpolates the
//! control displacements exactly. Sample coordinates within 1e-6 of an
//! integer snap onto it, so zero displacement reproduces the input
//! bit-for-bit instead of blurring through near-identity bilinear weights.

use crate::error::{DegradeError, Result};
use crate::image_buf::Image;
use crate::ops::bilinear_sample;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SNAP_EPS: f32 = 1e-6;

fn kernel_u(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln() // r^2 ln r = r^2 * ln(sqrt(r2)) = 0.5 r^2 ln(r2)
    }
}

/// Spline fitted to control points; evaluates the full mapping.
pub struct TpsMap {
    points: Vec<(f64, f64)>,
    /// Kernel weights then affine (1, x, y) coefficients, per output axis.
    wx: DVector<f64>,
    wy: DVector<f64>,
}

impl TpsMap {
    /// Fits the interpolating spline through `points -> targets`.
    pub fn fit(points: &[(f64, f64)], targets: &[(f64, f64)]) -> Result<Self> {
        let n = points.len();
        if n < 3 || targets.len() != n {
            return Err(DegradeError::Contract(format!(
                "TPS needs >=3 matched control points, got {n}/{}",
                targets.len()
            )));
        }
        let mut a = DMatrix::<f64>::zeros(n + 3, n + 3);
        for i in 0..n {
            for j in 0..n {
                let dx = points[i].0 - points[j].0;
                let dy = points[i].1 - points[j].1;
                a[(i, j)] = kernel_u(dx * dx + dy * dy);
            }
            a[(i, n)] = 1.0;
            a[(i, n + 1)] = points[i].0;
            a[(i, n + 2)] = points[i].1;
            a[(n, i)] = 1.0;
            a[(n + 1, i)] = points[i].0;
            a[(n + 2, i)] = points[i].1;
        }
        let mut bx = DVector::<f64>::zeros(n + 3);
        let mut by = DVector::<f64>::zeros(n + 3);
        for i in 0..n {
            bx[i] = targets[i].0;
            by[i] = targets[i].1;
        }
        let lu = a.lu();
        let wx = lu
            .solve(&bx)
            .ok_or_else(|| DegradeError::Contract("singular TPS system".into()))?;
        let wy = lu
            .solve(&by)
            .ok_or_else(|| DegradeError::Contract("singular TPS system".into()))?;
        Ok(Self {
            points: points.to_vec(),
            wx,
            wy,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let n = self.points.len();
        let mut ox = self.wx[n] + self.wx[n + 1] * x + self.wx[n + 2] * y;
        let mut oy = self.wy[n] + self.wy[n + 1] * x + self.wy[n + 2] * y;
        for (i, &(px, py)) in self.points.iter().enumerate() {
            let dx = x - px;
            let dy = y - py;
            let u = kernel_u(dx * dx + dy * dy);
            ox += self.wx[i] * u;
            oy += self.wy[i] * u;
        }
        (ox, oy)
    }
}

/// Uniform `grid x grid` lattice spanning `[0, side-1]` per axis.
pub fn control_grid(grid: usize, side: usize) -> Vec<(f64, f64)> {
    let step = (side - 1) as f64 / (grid - 1) as f64;
    let mut pts = Vec::with_capacity(grid * grid);
    for gy in 0..grid {
        for gx in 0..grid {
            pts.push((gx as f64 * step, gy as f64 * step));
        }
    }
    pts
}

/// Warps with i.i.d. Gaussian control-point displacements of stddev `sigma`
/// (pixels). The spline maps output to input coordinates, so the image is
/// pulled back through the distortion.
pub fn tps_warp(img: &Image, grid: usize, sigma: f32, rng: &mut ChaCha8Rng) -> Result<Image> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if grid < 2 {
        return Err(DegradeError::Contract(format!(
            "TPS grid {grid} must be at least 2"
        )));
    }
    if h != w {
        return Err(DegradeError::Contract(format!(
            "TPS warp expects square images, got {h}x{w}"
        )));
    }
    let points = control_grid(grid, h);
    let normal = Normal::new(0.0f64, sigma.max(0.0) as f64)
        .map_err(|e| DegradeError::Contract(format!("bad TPS sigma: {e}")))?;
    let targets: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x + normal.sample(rng), y + normal.sample(rng)))
        .collect();
    let map = TpsMap::fit(&points, &targets)?;

    let mut out = Image::zeros(h, w, c);
    let mut px = vec![0.0f32; c];
    for oy in 0..h {
        for ox in 0..w {
            let (sx, sy) = map.eval(ox as f64, oy as f64);
            let (mut sx, mut sy) = (sx as f32, sy as f32);
            if (sx - sx.round()).abs() < SNAP_EPS {
                sx = sx.round();
            }
            if (sy - sy.round()).abs() < SNAP_EPS {
                sy = sy.round();
            }
            bilinear_sample(img, sx, sy, &mut px);
            for (ch, &v) in px.iter().enumerate() {
                out.set(oy, ox, ch, v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cqd_tensor::rng::seeded_rng;

    fn test_image(side: usize) -> Image {
        let mut img = Image::zeros(side, side, 1);
        for y in 0..side {
            for x in 0..side {
                img.set(y, x, 0, ((x * 7 + y * 13) % 11) as f32 / 11.0);
            }
        }
        img
    }

    #[test]
    fn interpolates_control_points_exactly() {
        let points = control_grid(4, 16);
        let targets: Vec<(f64, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (x + (i % 3) as f64 - 1.0, y + (i % 5) as f64 * 0.5 - 1.0))
            .collect();
        let map = TpsMap::fit(&points, &targets).unwrap();
        for (p, t) in points.iter().zip(&targets) {
            let (ox, oy) = map.eval(p.0, p.1);
            assert!((ox - t.0).abs() < 1e-6 && (oy - t.1).abs() < 1e-6);
        }
    }

    #[test]
    fn pure_translation_is_recovered() {
        // constant displacement is affine, so the spline must reproduce it
        // everywhere, not just at control points
        let points = control_grid(3, 8);
        let targets: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x + 2.0, y - 1.0)).collect();
        let map = TpsMap::fit(&points, &targets).unwrap();
        for &(x, y) in &[(0.3, 4.2), (6.9, 1.1), (3.5, 3.5)] {
            let (ox, oy) = map.eval(x, y);
            assert!((ox - (x + 2.0)).abs() < 1e-9);
            assert!((oy - (y - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_sigma_is_bit_identity() {
        let img = test_image(16);
        let mut rng = seeded_rng(5);
        let out = tps_warp(&img, 4, 0.0, &mut rng).unwrap();
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn warp_is_deterministic_per_seed_and_moves_pixels() {
        let img = test_image(32);
        let a = tps_warp(&img, 5, 2.0, &mut seeded_rng(9)).unwrap();
        let b = tps_warp(&img, 5, 2.0, &mut seeded_rng(9)).unwrap();
        assert_eq!(a.data(), b.data());
        let c = tps_warp(&img, 5, 2.0, &mut seeded_rng(10)).unwrap();
        assert_ne!(a.data(), c.data());
        assert_ne!(a.data(), img.data());
    }

    #[test]
    fn rejects_degenerate_setups() {
        let img = test_image(8);
        assert!(tps_warp(&img, 1, 1.0, &mut seeded_rng(0)).is_err());
        let rect = Image::zeros(4, 8, 1);
        assert!(tps_warp(&rect, 3, 1.0, &mut seeded_rng(0)).is_err());
    }
}
