//! A parameterized classifier: an [`ArchSpec`] plus its tensors.

use crate::arch::ArchSpec;
use crate::error::{NetError, Result};
use cqd_tensor::rng::{derive_seed, he_uniform, seeded_rng};
use cqd_tensor::{Graph, Tensor, Var};

#[derive(Clone, Debug)]
pub struct Model {
    pub arch: ArchSpec,
    pub num_classes: usize,
    /// Block conv weights and biases in order, then fc1 and head pairs.
    pub params: Vec<Tensor>,
}

/// Stable names for the checkpoint tensor table, in parameter order.
pub fn param_names(arch: &ArchSpec) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..arch.blocks.len() {
        names.push(format!("block{i}.conv.w"));
        names.push(format!("block{i}.conv.b"));
    }
    names.push("fc1.w".into());
    names.push("fc1.b".into());
    names.push("head.w".into());
    names.push("head.b".into());
    names
}

/// Parameter shapes implied by an architecture and head width.
pub fn param_shapes(arch: &ArchSpec, num_classes: usize) -> Result<Vec<Vec<usize>>> {
    let mut shapes = Vec::new();
    let mut c_in = arch.input.0;
    for b in &arch.blocks {
        shapes.push(vec![b.filters, c_in, b.kernel, b.kernel]);
        shapes.push(vec![b.filters]);
        c_in = b.filters;
    }
    let flat = arch.flat_features()?;
    shapes.push(vec![flat, arch.hidden]);
    shapes.push(vec![arch.hidden]);
    shapes.push(vec![arch.hidden, num_classes]);
    shapes.push(vec![num_classes]);
    Ok(shapes)
}

fn init_param(shape: &[usize], seed: u64) -> Tensor {
    if shape.len() == 1 {
        return Tensor::zeros(shape.to_vec());
    }
    // fan_in: input channels x kernel area for conv, input rows for fc
    let fan_in = match shape.len() {
        4 => shape[1] * shape[2] * shape[3],
        _ => shape[0],
    };
    he_uniform(shape.to_vec(), fan_in, &mut seeded_rng(seed))
}

/// Row-wise argmax; ties resolve to the lowest index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let k = logits.shape()[logits.shape().len() - 1];
    logits
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

impl Model {
    /// Fresh He-uniform weights and zero biases; each tensor draws from its
    /// own derived stream so layer inits do not shift when others change.
    pub fn new(arch: ArchSpec, num_classes: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(NetError::Arch(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let shapes = param_shapes(&arch, num_classes)?;
        let params = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| init_param(s, derive_seed(seed, i as u64)))
            .collect();
        Ok(Self {
            arch,
            num_classes,
            params,
        })
    }

    /// Checks stored tensors against the architecture-implied shapes.
    pub fn validate(&self) -> Result<()> {
        let shapes = param_shapes(&self.arch, self.num_classes)?;
        if shapes.len() != self.params.len() {
            return Err(NetError::Shape(format!(
                "expected {} tensors, have {}",
                shapes.len(),
                self.params.len()
            )));
        }
        for (i, (want, have)) in shapes.iter().zip(&self.params).enumerate() {
            if want != have.shape() {
                return Err(NetError::Shape(format!(
                    "tensor {i} ({}) is {:?}, expected {:?}",
                    param_names(&self.arch)[i],
                    have.shape(),
                    want
                )));
            }
        }
        Ok(())
    }

    /// Replaces the class head for a new label set; the trunk is untouched.
    pub fn reinit_classifier(&mut self, num_classes: usize, seed: u64) -> Result<()> {
        if num_classes < 2 {
            return Err(NetError::Arch(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let n = self.params.len();
        self.num_classes = num_classes;
        self.params[n - 2] = init_param(
            &[self.arch.hidden, num_classes],
            derive_seed(seed, (n - 2) as u64),
        );
        self.params[n - 1] = init_param(&[num_classes], derive_seed(seed, (n - 1) as u64));
        Ok(())
    }

    /// Builds the forward pass on `g`. Returns one [`Var`] per parameter
    /// (constants when `frozen`, gradient-carrying otherwise) and the logits.
    pub fn forward(&self, g: &mut Graph, x: Var, frozen: bool) -> Result<(Vec<Var>, Var)> {
        let vars: Vec<Var> = self
            .params
            .iter()
            .map(|t| {
                if frozen {
                    g.constant(t.clone())
                } else {
                    g.param(t.clone())
                }
            })
            .collect();
        let mut cur = x;
        let mut pi = 0usize;
        for b in &self.arch.blocks {
            cur = g.conv2d(cur, vars[pi], b.stride, b.pad)?;
            cur = g.add_chan_bias(cur, vars[pi + 1])?;
            cur = g.relu(cur);
            if b.pool > 1 {
                cur = g.maxpool2d(cur, b.pool, b.pool)?;
            }
            pi += 2;
        }
        let bsz = g.value(cur).shape()[0];
        let flat = self.arch.flat_features()?;
        let cur = g.reshape(cur, vec![bsz, flat])?;
        let h1 = g.matmul(cur, vars[pi])?;
        let h1 = g.add_row_bias(h1, vars[pi + 1])?;
        let h1 = g.relu(h1);
        let z = g.matmul(h1, vars[pi + 2])?;
        let z = g.add_row_bias(z, vars[pi + 3])?;
        Ok((vars, z))
    }

    /// Logits without gradient bookkeeping.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let (_, z) = self.forward(&mut g, xv, true)?;
        Ok(g.value(z).clone())
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cqd_tensor::SgdState;

    #[test]
    fn init_is_deterministic_and_valid() {
        let a = Model::new(ArchSpec::shallow(64), 10, 5).unwrap();
        let b = Model::new(ArchSpec::shallow(64), 10, 5).unwrap();
        for (x, y) in a.params.iter().zip(&b.params) {
            assert_eq!(x.data(), y.data());
        }
        a.validate().unwrap();
        let c = Model::new(ArchSpec::shallow(64), 10, 6).unwrap();
        assert_ne!(a.params[0].data(), c.params[0].data());
    }

    #[test]
    fn forward_shapes_and_finiteness() {
        let m = Model::new(ArchSpec::deep(64), 7, 1).unwrap();
        let x = Tensor::full(vec![2, 3, 64, 64], 0.5);
        let z = m.logits(&x).unwrap();
        assert_eq!(z.shape(), &[2, 7]);
        assert!(z.is_finite());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let t = Tensor::new(vec![2, 3], vec![1.0, 1.0, 0.0, 0.5, 2.0, 2.0]).unwrap();
        assert_eq!(argmax_rows(&t), vec![0, 1]);
    }

    #[test]
    fn reinit_classifier_keeps_trunk() {
        let mut m = Model::new(ArchSpec::shallow(64), 10, 5).unwrap();
        let trunk: Vec<Tensor> = m.params[..m.params.len() - 2].to_vec();
        m.reinit_classifier(4, 99).unwrap();
        m.validate().unwrap();
        assert_eq!(m.num_classes, 4);
        for (a, b) in trunk.iter().zip(&m.params) {
            assert_eq!(a.data(), b.data());
        }
        let n = m.params.len();
        assert_eq!(m.params[n - 2].shape(), &[64, 4]);
    }

    #[test]
    fn few_sgd_steps_fit_a_toy_problem() {
        // 2 classes: bright top half vs bright bottom half
        let arch = ArchSpec {
            name: "toy".into(),
            input: (1, 8, 8),
            blocks: vec![crate::arch::ConvBlock {
                filters: 4,
                kernel: 3,
                stride: 1,
                pad: 1,
                pool: 2,
            }],
            hidden: 8,
        };
        let mut m = Model::new(arch, 2, 3).unwrap();
        let mut x = Tensor::zeros(vec![2, 1, 8, 8]);
        for i in 0..32 {
            x.data_mut()[i] = 1.0; // item 0: top half lit
            x.data_mut()[64 + 32 + i] = 1.0; // item 1: bottom half lit
        }
        let mut q = Tensor::zeros(vec![2, 2]);
        q.data_mut()[0] = 1.0;
        q.data_mut()[3] = 1.0;

        let mut opt = SgdState::new(&m.params);
        let mut first = None;
        let mut last = 0.0;
        for _ in 0..30 {
            let mut g = Graph::new();
            let xv = g.constant(x.clone());
            let qv = g.constant(q.clone());
            let (vars, z) = m.forward(&mut g, xv, false).unwrap();
            let p = g.softmax(z).unwrap();
            let loss = g.cross_entropy_mean(p, qv).unwrap();
            g.backward(loss).unwrap();
            let grads: Vec<&Tensor> = vars.iter().map(|v| g.grad(*v).unwrap()).collect();
            opt.step(&mut m.params, &grads, 0.05, 0.9, 0.0).unwrap();
            last = g.loss_f64(loss);
            first.get_or_insert(last);
        }
        assert!(last < first.unwrap() * 0.5, "loss {last} vs {first:?}");
        assert_eq!(m.predict(&x).unwrap(), vec![0, 1]);
    }
}
