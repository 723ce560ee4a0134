//! In-memory paired training data.
//!
//! Pairing is positional: `hq[i]` and `lq[i]` are two views of the same
//! underlying scene and always travel together through a batch. Methods
//! that only need one view simply ignore the other.

use crate::error::{DistillError, Result};
use cqd_degrade::image_buf::{to_chw, Image};
use cqd_degrade::io::{Manifest, PairedSample};
use cqd_tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Hq,
    Lq,
}

pub struct PairedSet {
    pub classes: Vec<String>,
    pub hq: Vec<Image>,
    pub lq: Vec<Image>,
    pub labels: Vec<u32>,
}

impl PairedSet {
    pub fn from_pairs(manifest: &Manifest, pairs: Vec<PairedSample>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(DistillError::Data("paired dataset is empty".into()));
        }
        let k = manifest.classes.len();
        let mut hq = Vec::with_capacity(pairs.len());
        let mut lq = Vec::with_capacity(pairs.len());
        let mut labels = Vec::with_capacity(pairs.len());
        for p in pairs {
            if (p.label as usize) >= k {
                return Err(DistillError::Data(format!(
                    "sample {:?} has label {} but only {k} classes",
                    p.id, p.label
                )));
            }
            hq.push(p.hq);
            lq.push(p.lq);
            labels.push(p.label);
        }
        Ok(PairedSet {
            classes: manifest.classes.clone(),
            hq,
            lq,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn view(&self, view: View) -> &[Image] {
        match view {
            View::Hq => &self.hq,
            View::Lq => &self.lq,
        }
    }

    /// NCHW batch of the chosen view for the given sample indices.
    pub fn batch(&self, idx: &[usize], view: View) -> Result<Tensor> {
        let imgs = self.view(view);
        let mut picked = Vec::with_capacity(idx.len());
        for &i in idx {
            let img = imgs.get(i).ok_or_else(|| {
                DistillError::Data(format!("sample index {i} out of range ({})", self.len()))
            })?;
            picked.push(img);
        }
        Ok(to_chw(&picked)?)
    }

    /// One-hot rows over `width` columns; `width` is the head size, which
    /// exceeds `num_classes` for separate-head training.
    pub fn one_hot(&self, idx: &[usize], width: usize) -> Tensor {
        let mut t = Tensor::zeros(vec![idx.len(), width]);
        for (r, &i) in idx.iter().enumerate() {
            t.data_mut()[r * width + self.labels[i] as usize] = 1.0;
        }
        t
    }
}

/// A training problem: the set plus disjoint index lists into it.
pub struct TrainData<'a> {
    pub set: &'a PairedSet,
    pub train: &'a [usize],
    /// Scored once per epoch for the report; may be empty.
    pub eval: &'a [usize],
    pub eval_view: View,
}

impl TrainData<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(DistillError::Data("training index list is empty".into()));
        }
        for &i in self.train.iter().chain(self.eval) {
            if i >= self.set.len() {
                return Err(DistillError::Data(format!(
                    "index {i} out of range ({})",
                    self.set.len()
                )));
            }
        }
        Ok(())
    }
}
