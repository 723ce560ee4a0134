//! Architecture descriptions, independent of any parameter values.

use crate::error::{NetError, Result};
use cqd_tensor::ops::conv2d_out_dims;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// Max-pool window (and stride) applied after the activation; 1 = none.
    pub pool: usize,
}

impl ConvBlock {
    fn new(filters: usize, stride: usize, pool: usize) -> Self {
        Self {
            filters,
            kernel: 3,
            stride,
            pad: 1,
            pool,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    /// Input planes as (channels, height, width).
    pub input: (usize, usize, usize),
    pub blocks: Vec<ConvBlock>,
    /// Width of the hidden fully-connected layer before the class head.
    pub hidden: usize,
}

impl ArchSpec {
    /// Three conv blocks, each followed by 2x pooling.
    pub fn shallow(side: usize) -> Self {
        Self {
            name: "shallow".into(),
            input: (3, side, side),
            blocks: vec![
                ConvBlock::new(8, 2, 2),
                ConvBlock::new(16, 1, 2),
                ConvBlock::new(32, 1, 2),
            ],
            hidden: 64,
        }
    }

    /// Six conv blocks at doubled widths; strictly more parameters and MACs
    /// than [`ArchSpec::shallow`] at the same input size.
    pub fn deep(side: usize) -> Self {
        Self {
            name: "deep".into(),
            input: (3, side, side),
            blocks: vec![
                ConvBlock::new(8, 2, 2),
                ConvBlock::new(16, 1, 1),
                ConvBlock::new(16, 1, 2),
                ConvBlock::new(32, 1, 1),
                ConvBlock::new(32, 1, 2),
                ConvBlock::new(64, 1, 1),
            ],
            hidden: 96,
        }
    }

    pub fn by_name(name: &str, side: usize) -> Result<Self> {
        match name {
            "shallow" => Ok(Self::shallow(side)),
            "deep" => Ok(Self::deep(side)),
            other => Err(NetError::Arch(format!(
                "unknown architecture {other:?}, expected shallow or deep"
            ))),
        }
    }

    /// Shape of the feature map after all blocks, before flattening.
    pub fn feature_dims(&self) -> Result<(usize, usize, usize)> {
        let (mut c, mut h, mut w) = self.input;
        for (i, b) in self.blocks.iter().enumerate() {
            let (oh, ow) = conv2d_out_dims(h, w, b.kernel, b.kernel, b.stride, b.pad)
                .map_err(|e| NetError::Arch(format!("block {i}: {e}")))?;
            c = b.filters;
            h = oh;
            w = ow;
            if b.pool > 1 {
                if b.pool > h || b.pool > w {
                    return Err(NetError::Arch(format!(
                        "block {i}: pool {} exceeds {h}x{w} feature map",
                        b.pool
                    )));
                }
                h = (h - b.pool) / b.pool + 1;
                w = (w - b.pool) / b.pool + 1;
            }
        }
        Ok((c, h, w))
    }

    pub fn flat_features(&self) -> Result<usize> {
        let (c, h, w) = self.feature_dims()?;
        Ok(c * h * w)
    }

    /// Trainable parameter count for a `num_classes`-way head.
    pub fn param_count(&self, num_classes: usize) -> Result<usize> {
        let mut c_in = self.input.0;
        let mut total = 0usize;
        for b in &self.blocks {
            total += b.filters * c_in * b.kernel * b.kernel + b.filters;
            c_in = b.filters;
        }
        total += self.flat_features()? * self.hidden + self.hidden;
        total += self.hidden * num_classes + num_classes;
        Ok(total)
    }

    /// Forward multiply-accumulates per sample, conv and fc only.
    pub fn macs_per_sample(&self, num_classes: usize) -> Result<usize> {
        let (mut c, mut h, mut w) = self.input;
        let mut total = 0usize;
        for b in &self.blocks {
            let (oh, ow) = conv2d_out_dims(h, w, b.kernel, b.kernel, b.stride, b.pad)
                .map_err(|e| NetError::Arch(e.to_string()))?;
            total += b.filters * c * b.kernel * b.kernel * oh * ow;
            c = b.filters;
            h = oh;
            w = ow;
            if b.pool > 1 {
                h = (h - b.pool) / b.pool + 1;
                w = (w - b.pool) / b.pool + 1;
            }
        }
        total += c * h * w * self.hidden;
        total += self.hidden * num_classes;
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_and_flatten() {
        let s = ArchSpec::shallow(64);
        assert_eq!(s.feature_dims().unwrap(), (32, 4, 4));
        assert_eq!(s.flat_features().unwrap(), 512);
        let d = ArchSpec::deep(64);
        assert_eq!(d.feature_dims().unwrap(), (64, 4, 4));
        assert_eq!(d.flat_features().unwrap(), 1024);
    }

    #[test]
    fn deep_strictly_larger_than_shallow() {
        for side in [32, 64, 96] {
            let s = ArchSpec::shallow(side);
            let d = ArchSpec::deep(side);
            assert!(d.param_count(10).unwrap() > s.param_count(10).unwrap());
            assert!(d.macs_per_sample(10).unwrap() > s.macs_per_sample(10).unwrap());
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(
            ArchSpec::by_name("resnet", 64),
            Err(NetError::Arch(_))
        ));
    }

    #[test]
    fn survives_serde_roundtrip() {
        let d = ArchSpec::deep(64);
        let json = serde_json::to_string(&d).unwrap();
        let back: ArchSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
