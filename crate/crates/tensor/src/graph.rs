//! Tape-based reverse-mode autodiff.
//!
//! A [`Graph`] owns a flat list of nodes. Forward ops evaluate eagerly and
//! append a node recording their inputs; [`Graph::backward`] walks the tape
//! in reverse exactly once. Nodes that no gradient-requiring leaf feeds into
//! are skipped, so constant inputs (labels, teacher targets) cost nothing in
//! the backward pass.
//!
//! Scalar reductions carry an `f64` shadow value alongside the `f32` tensor;
//! [`Graph::loss_f64`] reads it so loss curves and finite-difference checks
//! are not limited by single-precision accumulation.

use crate::error::{Result, TensorError};
use crate::ops;
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`]. Only valid for the graph that made it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        stride: usize,
        pad: usize,
    },
    MaxPool2d {
        x: Var,
        argmax: Vec<u32>,
    },
    Relu {
        x: Var,
    },
    Matmul {
        x: Var,
        w: Var,
    },
    AddRowBias {
        x: Var,
        b: Var,
    },
    AddChanBias {
        x: Var,
        b: Var,
    },
    Reshape {
        x: Var,
    },
    Softmax {
        x: Var,
    },
    LogClamped {
        x: Var,
    },
    GatherRows {
        x: Var,
        idx: Vec<u32>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Square {
        x: Var,
    },
    Scale {
        x: Var,
        c: f32,
    },
    MeanAll {
        x: Var,
    },
    CrossEntropyMean {
        p: Var,
        q: Var,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    shadow: Option<f64>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_ran: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool, shadow: Option<f64>) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            shadow,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a reduction node in full precision.
    pub fn loss_f64(&self, v: Var) -> f64 {
        let n = &self.nodes[v.0];
        n.shadow.unwrap_or_else(|| n.value.data()[0] as f64)
    }

    /// Accumulated gradient of a node; `None` until backward has run or if
    /// the node does not require gradients.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Constant input; the backward pass will not flow through it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false, None)
    }

    /// Trainable input; `grad` is available after backward.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true, None)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let value = ops::conv2d_fwd(self.value(x), self.value(w), stride, pad)?;
        let needs = self.needs(x) || self.needs(w);
        Ok(self.push(value, Op::Conv2d { x, w, stride, pad }, needs, None))
    }

    pub fn maxpool2d(&mut self, x: Var, k: usize, stride: usize) -> Result<Var> {
        let (value, argmax) = ops::maxpool2d_fwd(self.value(x), k, stride)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::MaxPool2d { x, argmax }, needs, None))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = ops::relu_fwd(self.value(x));
        let needs = self.needs(x);
        self.push(value, Op::Relu { x }, needs, None)
    }

    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let value = ops::matmul_fwd(self.value(x), self.value(w))?;
        let needs = self.needs(x) || self.needs(w);
        Ok(self.push(value, Op::Matmul { x, w }, needs, None))
    }

    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let value = ops::add_row_bias_fwd(self.value(x), self.value(b))?;
        let needs = self.needs(x) || self.needs(b);
        Ok(self.push(value, Op::AddRowBias { x, b }, needs, None))
    }

    pub fn add_chan_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let value = ops::add_chan_bias_fwd(self.value(x), self.value(b))?;
        let needs = self.needs(x) || self.needs(b);
        Ok(self.push(value, Op::AddChanBias { x, b }, needs, None))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(x).reshaped(shape)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Reshape { x }, needs, None))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let value = ops::softmax_fwd(self.value(x))?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Softmax { x }, needs, None))
    }

    /// Elementwise `ln(max(x, eps))`; keeps log-of-probability finite.
    pub fn log_clamped(&mut self, x: Var) -> Var {
        let value = ops::log_clamped_fwd(self.value(x));
        let needs = self.needs(x);
        self.push(value, Op::LogClamped { x }, needs, None)
    }

    /// Selects rows of a `[B,D]` node, e.g. one domain's slice of a mixed batch.
    pub fn gather_rows(&mut self, x: Var, idx: &[u32]) -> Result<Var> {
        let value = ops::gather_rows_fwd(self.value(x), idx)?;
        let needs = self.needs(x);
        Ok(self.push(
            value,
            Op::GatherRows {
                x,
                idx: idx.to_vec(),
            },
            needs,
            None,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(TensorError::ShapeMismatch(format!(
                "add {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let shadow = match (self.nodes[a.0].shadow, self.nodes[b.0].shadow) {
            (Some(fa), Some(fb)) => Some(fa + fb),
            _ => None,
        };
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b }, needs, shadow))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(TensorError::ShapeMismatch(format!(
                "sub {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x - y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let shadow = match (self.nodes[a.0].shadow, self.nodes[b.0].shadow) {
            (Some(fa), Some(fb)) => Some(fa - fb),
            _ => None,
        };
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub { a, b }, needs, shadow))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v * v).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Square { x }, needs, None)
    }

    pub fn scale(&mut self, x: Var, c: f32) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| c * v).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let shadow = self.nodes[x.0].shadow.map(|f| c as f64 * f);
        let needs = self.needs(x);
        self.push(value, Op::Scale { x, c }, needs, shadow)
    }

    /// Mean over all elements, accumulated in f64; yields a `[1]` node.
    pub fn mean_all(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mean = ops::sum_all(t) / t.numel() as f64;
        let value = Tensor::scalar(mean as f32);
        let needs = self.needs(x);
        self.push(value, Op::MeanAll { x }, needs, Some(mean))
    }

    /// Batch-mean cross-entropy `-sum q ln(max(p, eps))`; yields a `[1]` node.
    pub fn cross_entropy_mean(&mut self, p: Var, q: Var) -> Result<Var> {
        let loss = ops::cross_entropy_mean(self.value(p), self.value(q))?;
        let value = Tensor::scalar(loss as f32);
        let needs = self.needs(p) || self.needs(q);
        Ok(self.push(value, Op::CrossEntropyMean { p, q }, needs, Some(loss)))
    }

    fn acc_grad(&mut self, v: Var, delta: &[f32]) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let slot = &mut self.grads[v.0];
        match slot {
            Some(g) => {
                for (gv, &d) in g.data_mut().iter_mut().zip(delta) {
                    *gv += d;
                }
            }
            None => {
                let shape = self.nodes[v.0].value.shape().to_vec();
                *slot = Some(Tensor::new(shape, delta.to_vec()).expect("grad shape"));
            }
        }
    }

    /// Reverse pass from a single-element `loss` node. One shot per graph:
    /// intermediate state is consumed, so a second call is an error.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_ran {
            return Err(TensorError::DoubleBackward);
        }
        self.backward_ran = true;
        let seed = &self.nodes[loss.0].value;
        if seed.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                seed.shape()
            )));
        }
        if !seed.is_finite() {
            return Err(TensorError::NonFinite("loss".into()));
        }
        if !self.nodes[loss.0].needs_grad {
            return Err(TensorError::NoGradient(
                "loss does not depend on any parameter".into(),
            ));
        }
        self.grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let dy = match self.grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            // keep the gradient readable on leaves and on the loss itself
            let keep = matches!(self.nodes[i].op, Op::Leaf) || i == loss.0;
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Conv2d { x, w, stride, pad } => {
                    let (x, w, stride, pad) = (*x, *w, *stride, *pad);
                    let (dx, dw) = ops::conv2d_bwd(self.value(x), self.value(w), stride, pad, &dy)?;
                    if self.needs(x) {
                        self.acc_grad(x, dx.data());
                    }
                    self.acc_grad(w, dw.data());
                }
                Op::MaxPool2d { x, argmax } => {
                    let xv = *x;
                    let dx = ops::maxpool2d_bwd(
                        self.nodes[xv.0].value.shape(),
                        self.nodes[i].value.shape(),
                        argmax,
                        dy.data(),
                    );
                    self.acc_grad(xv, dx.data());
                }
                Op::Relu { x } => {
                    let xv = *x;
                    let dx = ops::relu_bwd(&self.nodes[xv.0].value, dy.data());
                    self.acc_grad(xv, &dx);
                }
                Op::Matmul { x, w } => {
                    let (x, w) = (*x, *w);
                    let (dx, dw) = ops::matmul_bwd(self.value(x), self.value(w), &dy)?;
                    if self.needs(x) {
                        self.acc_grad(x, dx.data());
                    }
                    self.acc_grad(w, dw.data());
                }
                Op::AddRowBias { x, b } => {
                    let (x, b) = (*x, *b);
                    let k = self.nodes[b.0].value.numel();
                    let db = ops::row_bias_grad(k, dy.data());
                    self.acc_grad(x, dy.data());
                    self.acc_grad(b, &db);
                }
                Op::AddChanBias { x, b } => {
                    let (x, b) = (*x, *b);
                    let shape = self.nodes[x.0].value.shape();
                    let (c, plane) = (shape[1], shape[2] * shape[3]);
                    let db = ops::chan_bias_grad(c, plane, dy.data());
                    self.acc_grad(x, dy.data());
                    self.acc_grad(b, &db);
                }
                Op::Reshape { x } => {
                    let xv = *x;
                    self.acc_grad(xv, dy.data());
                }
                Op::Softmax { x } => {
                    let xv = *x;
                    let dz = ops::softmax_bwd(&self.nodes[i].value, dy.data());
                    self.acc_grad(xv, &dz);
                }
                Op::LogClamped { x } => {
                    let xv = *x;
                    let dx = ops::log_clamped_bwd(&self.nodes[xv.0].value, dy.data());
                    self.acc_grad(xv, &dx);
                }
                Op::GatherRows { x, idx } => {
                    let xv = *x;
                    let (bsz, d) = self.nodes[xv.0].value.dims2()?;
                    let dx = ops::gather_rows_bwd(bsz, d, idx, dy.data());
                    self.acc_grad(xv, &dx);
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    self.acc_grad(a, dy.data());
                    self.acc_grad(b, dy.data());
                }
                Op::Sub { a, b } => {
                    let (a, b) = (*a, *b);
                    self.acc_grad(a, dy.data());
                    let neg: Vec<f32> = dy.data().iter().map(|&g| -g).collect();
                    self.acc_grad(b, &neg);
                }
                Op::Square { x } => {
                    let xv = *x;
                    let dx: Vec<f32> = self.nodes[xv.0]
                        .value
                        .data()
                        .iter()
                        .zip(dy.data())
                        .map(|(&v, &g)| 2.0 * v * g)
                        .collect();
                    self.acc_grad(xv, &dx);
                }
                Op::Scale { x, c } => {
                    let (xv, c) = (*x, *c);
                    let dx: Vec<f32> = dy.data().iter().map(|&g| c * g).collect();
                    self.acc_grad(xv, &dx);
                }
                Op::MeanAll { x } => {
                    let xv = *x;
                    let n = self.nodes[xv.0].value.numel();
                    let g = dy.data()[0] / n as f32;
                    let dx = vec![g; n];
                    self.acc_grad(xv, &dx);
                }
                Op::CrossEntropyMean { p, q } => {
                    let (p, q) = (*p, *q);
                    let (dp, dq) =
                        ops::cross_entropy_bwd(self.value(p), self.value(q), dy.data()[0]);
                    if self.needs(p) {
                        self.acc_grad(p, &dp);
                    }
                    if self.needs(q) {
                        self.acc_grad(q, &dq);
                    }
                }
            }
            if keep {
                self.grads[i] = Some(dy);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{he_uniform, seeded_rng};
    use rand::Rng;

    /// Central-difference check on the f64 loss shadow. f32 forward noise
    /// bounds accuracy, so tolerances are loose but catch any wrong formula.
    fn fd_check<F>(params: &mut [Tensor], eps: f32, tol: f32, build: F)
    where
        F: Fn(&mut Graph, &[Var]) -> Var,
    {
        let loss_at = |params: &[Tensor]| -> f64 {
            let mut g = Graph::new();
            let vars: Vec<Var> = params.iter().map(|t| g.param(t.clone())).collect();
            let loss = build(&mut g, &vars);
            g.loss_f64(loss)
        };
        let mut g = Graph::new();
        let vars: Vec<Var> = params.iter().map(|t| g.param(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.backward(loss).unwrap();

        for (pi, var) in vars.iter().enumerate() {
            let analytic = g.grad(*var).expect("param grad").clone();
            for j in 0..params[pi].numel() {
                let orig = params[pi].data()[j];
                params[pi].data_mut()[j] = orig + eps;
                let up = loss_at(params);
                params[pi].data_mut()[j] = orig - eps;
                let down = loss_at(params);
                params[pi].data_mut()[j] = orig;
                let fd = ((up - down) / (2.0 * eps as f64)) as f32;
                let a = analytic.data()[j];
                let denom = a.abs().max(fd.abs()).max(1.0);
                assert!(
                    (a - fd).abs() / denom < tol,
                    "param {pi}[{j}]: analytic {a} vs fd {fd}"
                );
            }
        }
    }

    fn one_hot(rows: &[usize], k: usize) -> Tensor {
        let mut t = Tensor::zeros(vec![rows.len(), k]);
        for (r, &c) in rows.iter().enumerate() {
            t.data_mut()[r * k + c] = 1.0;
        }
        t
    }

    #[test]
    fn grad_check_linear_softmax_ce() {
        let mut rng = seeded_rng(11);
        let x = Tensor::new(
            vec![4, 6],
            (0..24).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let mut params = vec![he_uniform(vec![6, 3], 6, &mut rng), Tensor::zeros(vec![3])];
        params[1].data_mut().copy_from_slice(&[0.1, -0.2, 0.05]);
        let q = one_hot(&[0, 2, 1, 0], 3);
        fd_check(&mut params, 1e-3, 2e-2, |g, vars| {
            let xv = g.constant(x.clone());
            let qv = g.constant(q.clone());
            let z = g.matmul(xv, vars[0]).unwrap();
            let z = g.add_row_bias(z, vars[1]).unwrap();
            let p = g.softmax(z).unwrap();
            g.cross_entropy_mean(p, qv).unwrap()
        });
    }

    #[test]
    fn grad_check_conv_pool_relu_stack() {
        let mut rng = seeded_rng(12);
        let x = Tensor::new(
            vec![2, 1, 6, 6],
            (0..72).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let mut params = vec![
            he_uniform(vec![2, 1, 3, 3], 9, &mut rng),
            Tensor::zeros(vec![2]),
            he_uniform(vec![8, 3], 8, &mut rng),
        ];
        let q = one_hot(&[1, 0], 3);
        fd_check(&mut params, 1e-3, 3e-2, |g, vars| {
            let xv = g.constant(x.clone());
            let qv = g.constant(q.clone());
            let c = g.conv2d(xv, vars[0], 1, 1).unwrap();
            let c = g.add_chan_bias(c, vars[1]).unwrap();
            let c = g.relu(c);
            let p = g.maxpool2d(c, 3, 3).unwrap();
            let flat = g.reshape(p, vec![2, 8]).unwrap();
            let z = g.matmul(flat, vars[2]).unwrap();
            let sm = g.softmax(z).unwrap();
            g.cross_entropy_mean(sm, qv).unwrap()
        });
    }

    #[test]
    fn grad_check_squared_difference_and_gather() {
        let mut rng = seeded_rng(13);
        let x = Tensor::new(
            vec![3, 4],
            (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let target = Tensor::new(vec![2, 2], vec![0.3, -0.4, 0.1, 0.9]).unwrap();
        let mut params = vec![he_uniform(vec![4, 2], 4, &mut rng)];
        fd_check(&mut params, 1e-3, 2e-2, |g, vars| {
            let xv = g.constant(x.clone());
            let tv = g.constant(target.clone());
            let z = g.matmul(xv, vars[0]).unwrap();
            let zs = g.gather_rows(z, &[0, 2]).unwrap();
            let d = g.sub(zs, tv).unwrap();
            let d2 = g.square(d);
            let m = g.mean_all(d2);
            g.scale(m, 2.5)
        });
    }

    #[test]
    fn grad_check_conv_input_path() {
        // The input side of conv2d, with frozen weights: saliency analysis
        // differentiates the image, not the filters.
        let mut rng = seeded_rng(15);
        for (stride, pad) in [(1, 0), (1, 1), (2, 1)] {
            let w = he_uniform(vec![3, 2, 3, 3], 18, &mut rng);
            let mut params = vec![Tensor::new(
                vec![1, 2, 6, 6],
                (0..72).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap()];
            fd_check(&mut params, 1e-3, 2e-2, |g, vars| {
                let wv = g.constant(w.clone());
                let y = g.conv2d(vars[0], wv, stride, pad).unwrap();
                let sq = g.square(y);
                g.mean_all(sq)
            });
        }
    }

    #[test]
    fn input_gradient_flows_to_requested_leaf() {
        let mut rng = seeded_rng(14);
        let mut g = Graph::new();
        let x = g.param(
            Tensor::new(
                vec![1, 4],
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap(),
        );
        let w = g.constant(he_uniform(vec![4, 2], 4, &mut rng));
        let q = g.constant(one_hot(&[1], 2));
        let z = g.matmul(x, w).unwrap();
        let p = g.softmax(z).unwrap();
        let loss = g.cross_entropy_mean(p, q).unwrap();
        g.backward(loss).unwrap();
        let gx = g.grad(x).expect("input grad");
        assert!(gx.data().iter().any(|&v| v != 0.0));
        // constants never accumulate gradients
        assert!(g.grad(w).is_none());
        assert!(g.grad(q).is_none());
    }

    #[test]
    fn second_backward_is_rejected() {
        let mut g = Graph::new();
        let x = g.param(Tensor::new(vec![1, 2], vec![0.3, 0.7]).unwrap());
        let q = g.constant(Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap());
        let loss = g.cross_entropy_mean(x, q).unwrap();
        g.backward(loss).unwrap();
        assert!(matches!(g.backward(loss), Err(TensorError::DoubleBackward)));
    }

    #[test]
    fn backward_rejects_non_scalar_and_detached_loss() {
        let mut g = Graph::new();
        let x = g.param(Tensor::new(vec![1, 2], vec![0.3, 0.7]).unwrap());
        assert!(matches!(g.backward(x), Err(TensorError::Contract(_))));

        let mut g2 = Graph::new();
        let c = g2.constant(Tensor::scalar(1.5));
        let s = g2.scale(c, 2.0);
        assert!(matches!(g2.backward(s), Err(TensorError::NoGradient(_))));
    }

    #[test]
    fn scalar_chain_keeps_f64_shadow() {
        let mut g = Graph::new();
        let p = g.param(Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap());
        let q = g.constant(Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap());
        let l1 = g.cross_entropy_mean(p, q).unwrap();
        let l2 = g.scale(l1, 200.0);
        let total = g.add(l1, l2).unwrap();
        let expect = std::f64::consts::LN_2 * 201.0;
        assert!((g.loss_f64(total) - expect).abs() < 1e-6 * expect);
    }
}
