//! Where a model looks: input gradients and their per-pixel magnitude.

use cqd_degrade::image_buf::{to_chw, Image};
use cqd_nets::Model;
use cqd_tensor::{Graph, Tensor};

use crate::error::{AnalysisError, Result};

/// Per-pixel nonnegative attention map derived from an input gradient.
#[derive(Clone, Debug)]
pub struct Saliency {
    height: usize,
    width: usize,
    values: Vec<f32>,
    /// Provenance tags; never consulted by the math.
    pub source: Option<SaliencySource>,
}

#[derive(Clone, Debug)]
pub struct SaliencySource {
    pub image_id: String,
    pub label: u32,
    pub model: String,
}

impl Saliency {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(AnalysisError::Contract(format!(
                "saliency holds {} values, dims {height}x{width} need {}",
                values.len(),
                height * width
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(AnalysisError::Contract(format!(
                "saliency values must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
            source: None,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major `height * width` map.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn tagged(mut self, source: SaliencySource) -> Self {
        self.source = Some(source);
        self
    }
}

/// Gradient of the clamped log-likelihood of `label` with respect to every
/// input value, as an image matching `image`'s layout. One backward pass;
/// the model parameters enter the graph as constants and are not touched.
pub fn input_gradient(model: &Model, image: &Image, label: u32) -> Result<Image> {
    let (c, h, w) = model.arch.input;
    if (image.channels(), image.height(), image.width()) != (c, h, w) {
        return Err(AnalysisError::Contract(format!(
            "model expects {c}x{h}x{w} input, image is {}x{}x{}",
            image.channels(),
            image.height(),
            image.width()
        )));
    }
    if label as usize >= model.num_classes {
        return Err(AnalysisError::Contract(format!(
            "label {label} out of range for {} classes",
            model.num_classes
        )));
    }

    let mut g = Graph::new();
    let xv = g.param(to_chw(&[image])?);
    let (_, z) = model.forward(&mut g, xv, true)?;
    let p = g.softmax(z)?;
    let mut onehot = vec![0.0f32; model.num_classes];
    onehot[label as usize] = 1.0;
    let target = g.constant(Tensor::new(vec![1, model.num_classes], onehot)?);
    // With a one-hot target the batch-mean cross entropy is exactly the
    // negative clamped log-likelihood of `label`.
    let nll = g.cross_entropy_mean(p, target)?;
    g.backward(nll)?;
    let grad = g
        .grad(xv)
        .expect("input registered as a gradient-carrying leaf");
    if !grad.is_finite() {
        return Err(AnalysisError::NonFinite(
            "input gradient is not finite".into(),
        ));
    }

    // CHW gradient of the negative log-likelihood -> HWC gradient of the
    // log-likelihood.
    let gd = grad.data();
    let mut out = vec![0.0f32; h * w * c];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[(y * w + x) * c + ch] = -gd[(ch * h + y) * w + x];
            }
        }
    }
    Ok(Image::new(h, w, c, out)?)
}

/// Per-pixel L2 norm of a gradient image across its channels.
pub fn pixel_grad_norm(grad: &Image) -> Saliency {
    let (h, w) = (grad.height(), grad.width());
    let mut values = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let sq: f32 = grad.pixel(y, x).iter().map(|v| v * v).sum();
            values.push(sq.sqrt());
        }
    }
    Saliency {
        height: h,
        width: w,
        values,
        source: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cqd_data::{generate_dataset, GenConfig};
    use cqd_nets::ArchSpec;
    use cqd_tensor::ops;
    use cqd_tensor::rng::seeded_rng;
    use rand::Rng;

    fn scene(side: usize) -> Image {
        let cfg = GenConfig {
            num_classes: 2,
            per_class: 1,
            side,
            seed: 11,
            clutter: (2, 4),
        };
        let (_, samples) = generate_dataset(&cfg).unwrap();
        samples.into_iter().next().unwrap().image
    }

    fn model(side: usize) -> Model {
        Model::new(ArchSpec::shallow(side), 4, 23).unwrap()
    }

    /// Clamped log-likelihood of `label`, recomputed outside the graph.
    fn log_lik(m: &Model, img: &Image, label: u32) -> f64 {
        let z = m.logits(&to_chw(&[img]).unwrap()).unwrap();
        let p = ops::softmax_fwd(&z).unwrap();
        let lp = ops::log_clamped_fwd(&p);
        lp.data()[label as usize] as f64
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(32);
        // A rendered scene has flat color patches, which produce exactly
        // tied pooling windows; at a tie the one-sided gradient and a
        // central difference legitimately disagree. Random pixels make
        // every comparison point generic.
        let mut rng = seeded_rng(9);
        let data: Vec<f32> = (0..32 * 32 * 3)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let img = Image::new(32, 32, 3, data).unwrap();
        let grad = input_gradient(&m, &img, 1).unwrap();

        let scale = grad.data().iter().fold(0.0f32, |acc, v| acc.max(v.abs())) as f64;
        assert!(scale > 0.0, "gradient vanished everywhere");

        let mut rng = seeded_rng(5);
        for _ in 0..20 {
            let y = rng.random_range(0..img.height());
            let x = rng.random_range(0..img.width());
            let ch = rng.random_range(0..img.channels());
            let an = grad.get(y, x, ch) as f64;

            // Multi-scale probe: a large step can straddle a relu or pooling
            // kink and a small step amplifies f32 forward noise, so the
            // gradient only has to match at one of the scales. A wrong
            // gradient fails at all of them.
            let best = [1e-2f32, 3e-3, 4e-2]
                .iter()
                .map(|&eps| {
                    let mut plus = img.clone();
                    plus.set(y, x, ch, img.get(y, x, ch) + eps);
                    let mut minus = img.clone();
                    minus.set(y, x, ch, img.get(y, x, ch) - eps);
                    let fd = (log_lik(&m, &plus, 1) - log_lik(&m, &minus, 1)) / (2.0 * eps as f64);
                    // Entries tiny on the map's own scale carry only noise,
                    // so the denominator floors at 1% of the largest entry.
                    (fd - an).abs() / fd.abs().max(an.abs()).max(0.01 * scale)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(
                best < 1e-2,
                "pixel ({y},{x},{ch}): analytic {an}, best rel err {best}"
            );
        }
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let m = model(32);
        let img = scene(32);
        let a = input_gradient(&m, &img, 0).unwrap();
        let b = input_gradient(&m, &img, 0).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn zeroed_first_layer_blocks_all_input_gradient() {
        let mut m = model(32);
        let w0 = m.params[0].data_mut();
        for v in w0 {
            *v = 0.0;
        }
        let img = scene(32);
        let grad = input_gradient(&m, &img, 2).unwrap();
        assert!(grad.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_mismatched_image_and_label() {
        let m = model(32);
        let img = scene(32);
        assert!(input_gradient(&m, &img, 4).is_err());
        let small = Image::zeros(16, 16, 3);
        assert!(input_gradient(&m, &small, 0).is_err());
    }

    #[test]
    fn norm_is_pythagorean_across_channels() {
        let mut grad = Image::zeros(2, 2, 3);
        grad.set(0, 1, 0, 3.0);
        grad.set(0, 1, 2, -4.0);
        let s = pixel_grad_norm(&grad);
        assert_eq!(s.values()[1], 5.0);
        assert_eq!(s.values()[0], 0.0);
        assert_eq!(s.values()[2], 0.0);
        assert_eq!(s.values()[3], 0.0);
    }

    #[test]
    fn zero_gradient_gives_zero_saliency() {
        let s = pixel_grad_norm(&Image::zeros(4, 5, 3));
        assert_eq!(s.height(), 4);
        assert_eq!(s.width(), 5);
        assert!(s.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_channel_norm_is_absolute_value() {
        let grad = Image::new(1, 3, 1, vec![-2.0, 0.5, 0.0]).unwrap();
        let s = pixel_grad_norm(&grad);
        assert_eq!(s.values(), &[2.0, 0.5, 0.0]);
    }

    #[test]
    fn saliency_constructor_enforces_invariants() {
        assert!(Saliency::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Saliency::new(2, 2, vec![0.0, 1.0, -0.5, 0.0]).is_err());
        assert!(Saliency::new(2, 2, vec![0.0, 1.0, f32::NAN, 0.0]).is_err());
        assert!(Saliency::new(2, 2, vec![0.0, 1.0, 0.5, 0.0]).is_ok());
    }
}
