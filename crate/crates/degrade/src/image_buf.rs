//! In-memory image: interleaved channels, f32 values nominally in [0, 1].

use crate::error::{DegradeError, Result};
use cqd_tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    h: usize,
    w: usize,
    c: usize,
    /// Row-major, channel-interleaved: `data[(y*w + x)*c + ch]`.
    data: Vec<f32>,
}

impl Image {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 || c == 0 {
            return Err(DegradeError::Contract(format!(
                "image dims {h}x{w}x{c} must be positive"
            )));
        }
        if data.len() != h * w * c {
            return Err(DegradeError::Contract(format!(
                "image buffer holds {} values, dims {h}x{w}x{c} need {}",
                data.len(),
                h * w * c
            )));
        }
        Ok(Self { h, w, c, data })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> f32 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, v: f32) {
        self.data[(y * self.w + x) * self.c + ch] = v;
    }

    /// All channel values at one pixel.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let base = (y * self.w + x) * self.c;
        &self.data[base..base + self.c]
    }
}

/// Packs images into a `[B, C, H, W]` tensor for the networks.
pub fn to_chw(images: &[&Image]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| DegradeError::Contract("empty batch".into()))?;
    let (h, w, c) = (first.h, first.w, first.c);
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if img.h != h || img.w != w || img.c != c {
            return Err(DegradeError::Contract(format!(
                "mixed image sizes in batch: {}x{}x{} vs {h}x{w}x{c}",
                img.h, img.w, img.c
            )));
        }
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data.push(img.get(y, x, ch));
                }
            }
        }
    }
    Tensor::new(vec![images.len(), c, h, w], data)
        .map_err(|e| DegradeError::Contract(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_interleaved() {
        let mut img = Image::zeros(2, 3, 2);
        img.set(1, 2, 1, 0.7);
        assert_eq!(img.data()[(1 * 3 + 2) * 2 + 1], 0.7);
        assert_eq!(img.get(1, 2, 1), 0.7);
        assert_eq!(img.pixel(1, 2), &[0.0, 0.7]);
    }

    #[test]
    fn chw_conversion_is_planar() {
        let img = Image::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = to_chw(&[&img]).unwrap();
        assert_eq!(t.shape(), &[1, 2, 1, 2]);
        // channel 0 plane then channel 1 plane
        assert_eq!(t.data(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn rejects_bad_buffer_and_mixed_batch() {
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        let a = Image::zeros(2, 2, 1);
        let b = Image::zeros(2, 3, 1);
        assert!(to_chw(&[&a, &b]).is_err());
    }
}
