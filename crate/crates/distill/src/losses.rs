//! Temperature smoothing and the teacher-matching losses.
//!
//! Smoothing a distribution `p` means re-normalizing `exp(log(p)/T)`. For a
//! distribution produced by a softmax this equals `softmax(z/T)` because the
//! log-sum-exp term is constant per row and cancels; the logit form is the
//! one used on the training path since it needs no clamping.

use crate::config::Loss2Kind;
use crate::error::{DistillError, Result};
use cqd_tensor::{ops, Graph, Tensor, Var};

fn check_temperature(t: f64) -> Result<f32> {
    if !(t.is_finite() && t > 0.0) {
        return Err(DistillError::Config(format!(
            "temperature must be positive, got {t}"
        )));
    }
    Ok((1.0 / t) as f32)
}

/// Literal smoothing of probability rows: softmax(log(p)/T).
pub fn smooth(p: &Tensor, t: f64) -> Result<Tensor> {
    let inv = check_temperature(t)?;
    let shape = p.shape();
    if shape.len() != 2 {
        return Err(DistillError::Data(format!(
            "expected [batch, classes] probabilities, got {shape:?}"
        )));
    }
    let k = shape[1];
    for (r, row) in p.data().chunks(k).enumerate() {
        let sum: f64 = row.iter().map(|&v| v as f64).sum();
        if (sum - 1.0).abs() > 1e-5 {
            return Err(DistillError::Data(format!(
                "row {r} sums to {sum}, not a distribution"
            )));
        }
    }
    let logp = ops::log_clamped_fwd(p);
    let scaled = Tensor::new(
        shape.to_vec(),
        logp.data().iter().map(|&v| v * inv).collect(),
    )?;
    Ok(ops::softmax_fwd(&scaled)?)
}

/// Smoothed distribution of a logit batch: softmax(z/T).
pub fn smooth_logits(z: &Tensor, t: f64) -> Result<Tensor> {
    let inv = check_temperature(t)?;
    let scaled = Tensor::new(
        z.shape().to_vec(),
        z.data().iter().map(|&v| v * inv).collect(),
    )?;
    Ok(ops::softmax_fwd(&scaled)?)
}

/// Teacher-matching term as a graph node over the student's logits. The
/// teacher side enters as a constant, so no gradient reaches it.
pub fn distill_term(
    g: &mut Graph,
    student_logits: Var,
    teacher_logits: &Tensor,
    kind: Loss2Kind,
    t: f64,
) -> Result<Var> {
    if g.value(student_logits).shape() != teacher_logits.shape() {
        return Err(DistillError::Data(format!(
            "student logits {:?} vs teacher logits {:?}",
            g.value(student_logits).shape(),
            teacher_logits.shape()
        )));
    }
    match kind {
        Loss2Kind::SmoothedCe => {
            let inv = check_temperature(t)?;
            let zs = g.scale(student_logits, inv);
            let p = g.softmax(zs)?;
            let q = g.constant(smooth_logits(teacher_logits, t)?);
            Ok(g.cross_entropy_mean(p, q)?)
        }
        Loss2Kind::SquaredLogits => {
            let tv = g.constant(teacher_logits.clone());
            let d = g.sub(student_logits, tv)?;
            let sq = g.square(d);
            Ok(g.mean_all(sq))
        }
    }
}

/// Scalar value of the matching term for fixed logits.
pub fn distill_loss(
    student_logits: &Tensor,
    teacher_logits: &Tensor,
    kind: Loss2Kind,
    t: f64,
) -> Result<f64> {
    let mut g = Graph::new();
    let s = g.constant(student_logits.clone());
    let term = distill_term(&mut g, s, teacher_logits, kind, t)?;
    Ok(g.loss_f64(term))
}
