//! SGD with classical momentum and L2 weight decay folded into the gradient:
//!
//! ```text
//! v <- momentum * v - lr * (g + weight_decay * theta)
//! theta <- theta + v
//! ```

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

pub struct SgdState {
    velocity: Vec<Tensor>,
}

impl SgdState {
    /// Zero velocity per parameter, shapes taken from `params`.
    pub fn new(params: &[Tensor]) -> Self {
        Self {
            velocity: params
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
        }
    }

    pub fn step(
        &mut self,
        params: &mut [Tensor],
        grads: &[&Tensor],
        lr: f32,
        momentum: f32,
        weight_decay: f32,
    ) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != params.len() {
            return Err(TensorError::Contract(format!(
                "optimizer state covers {} params, got {} params / {} grads",
                self.velocity.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            if p.shape() != g.shape() {
                return Err(TensorError::ShapeMismatch(format!(
                    "param {:?} vs grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                *vv = momentum * *vv - lr * (gv + weight_decay * *pv);
                *pv += *vv;
            }
        }
        Ok(())
    }
}
