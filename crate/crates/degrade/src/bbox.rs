//! Axis-aligned boxes in pixel coordinates, half-open on the high edge.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f32,
    pub y0: f32,
    /// Exclusive.
    pub x1: f32,
    /// Exclusive.
    pub y1: f32,
}

impl BBox {
    pub fn new(x0: f32, y0: f32, x1: f32, y1: f32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f32 {
        (self.x1 - self.x0).max(0.0)
    }

    pub fn height(&self) -> f32 {
        (self.y1 - self.y0).max(0.0)
    }

    pub fn area(&self) -> f32 {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    /// Intersects with the image rectangle `[0,w) x [0,h)`.
    pub fn clamped(&self, w: usize, h: usize) -> Self {
        Self {
            x0: self.x0.max(0.0),
            y0: self.y0.max(0.0),
            x1: self.x1.min(w as f32),
            y1: self.y1.min(h as f32),
        }
    }

    /// Whether the pixel with integer coordinates `(x, y)` falls inside.
    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        let (xf, yf) = (x as f32, y as f32);
        xf >= self.x0 && xf < self.x1 && yf >= self.y0 && yf < self.y1
    }

    /// Grows every side by `margin`, for loose crops around an object.
    pub fn expanded(&self, margin: f32) -> Self {
        Self {
            x0: self.x0 - margin,
            y0: self.y0 - margin,
            x1: self.x1 + margin,
            y1: self.y1 + margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_and_membership() {
        let b = BBox::new(-2.0, 3.0, 10.0, 9.0).clamped(8, 8);
        assert_eq!(b, BBox::new(0.0, 3.0, 8.0, 8.0));
        assert!(b.contains_pixel(0, 3));
        assert!(!b.contains_pixel(0, 2));
        assert!(!b.contains_pixel(8, 4)); // high edge exclusive
        assert!((b.area() - 40.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_boxes_are_empty() {
        assert!(BBox::new(5.0, 5.0, 5.0, 9.0).is_empty());
        assert_eq!(BBox::new(6.0, 2.0, 5.0, 3.0).width(), 0.0);
    }
}
