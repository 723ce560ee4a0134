//! The mini-batch SGD loop shared by every training method.

use crate::config::TrainConfig;
use crate::data::{PairedSet, TrainData, View};
use crate::error::{DistillError, Result};
use crate::losses::distill_term;
use crate::report::{EpochStats, TrainReport};
use cqd_degrade::image_buf::{to_chw, Image};
use cqd_nets::{argmax_rows, Model};
use cqd_tensor::rng::{derive_seed, seeded_rng};
use cqd_tensor::{lr_at, Graph, SgdState, Tensor, TensorError};
use rand::seq::SliceRandom;

const EVAL_BATCH: usize = 64;

/// Which view each batch element takes during training.
#[derive(Clone, Copy)]
pub(crate) enum TrainView {
    Single(View),
    /// Every training sample appears twice per epoch, once per view.
    Union,
}

/// Classifier layout. `Split` doubles the head and routes each sample to
/// the block matching its view, so the two views stop sharing class rows.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum HeadMode {
    Shared,
    Split,
}

fn head_offset(head: HeadMode, view: View, k: usize) -> usize {
    match (head, view) {
        (HeadMode::Shared, _) | (HeadMode::Split, View::Hq) => 0,
        (HeadMode::Split, View::Lq) => k,
    }
}

/// Runs `epochs` passes of SGD on `model`. Teacher logits, when given, are
/// row-aligned with the full set and weighted by `cfg.lambda`. Shuffling is
/// derived from (seed, phase, epoch) so runs replay exactly.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit(
    model: &mut Model,
    cfg: &TrainConfig,
    data: &TrainData,
    view: TrainView,
    head: HeadMode,
    teacher_logits: Option<&[f32]>,
    epochs: u32,
    phase: u32,
    report: &mut TrainReport,
) -> Result<()> {
    let set = data.set;
    let k = set.num_classes();
    let want = match head {
        HeadMode::Shared => k,
        HeadMode::Split => 2 * k,
    };
    if model.num_classes != want {
        return Err(DistillError::Config(format!(
            "model has a {}-way head, expected {want}",
            model.num_classes
        )));
    }
    if let Some(tl) = teacher_logits {
        if tl.len() != set.len() * k {
            return Err(DistillError::Config(format!(
                "teacher logits cover {} values, expected {}",
                tl.len(),
                set.len() * k
            )));
        }
    }

    let mut opt = SgdState::new(&model.params);
    let mut items: Vec<(usize, View)> = match view {
        TrainView::Single(v) => data.train.iter().map(|&i| (i, v)).collect(),
        TrainView::Union => data
            .train
            .iter()
            .flat_map(|&i| [(i, View::Hq), (i, View::Lq)])
            .collect(),
    };

    for epoch in 0..epochs {
        let mut rng = seeded_rng(derive_seed(
            derive_seed(cfg.seed, phase as u64),
            epoch as u64,
        ));
        items.shuffle(&mut rng);
        let lr = lr_at(cfg.lr_start, cfg.lr_end, cfg.schedule_epochs, epoch);
        let mut task_sum = 0.0f64;
        let mut dist_sum = 0.0f64;
        let mut seen = 0usize;

        for (bi, batch) in items.chunks(cfg.batch_size).enumerate() {
            let idx: Vec<usize> = batch.iter().map(|&(i, _)| i).collect();
            let imgs: Vec<&Image> = batch.iter().map(|&(i, v)| &set.view(v)[i]).collect();
            let x = to_chw(&imgs)?;

            let mut g = Graph::new();
            let xv = g.constant(x);
            let (params, raw) = model.forward(&mut g, xv, false)?;
            let logits = match head {
                HeadMode::Shared => raw,
                HeadMode::Split => {
                    let rows = g.reshape(raw, vec![2 * batch.len(), k])?;
                    let pick: Vec<u32> = batch
                        .iter()
                        .enumerate()
                        .map(|(r, &(_, v))| (2 * r + head_offset(head, v, k) / k) as u32)
                        .collect();
                    g.gather_rows(rows, &pick)?
                }
            };
            let p = g.softmax(logits)?;
            let q = g.constant(set.one_hot(&idx, k));
            let task = g.cross_entropy_mean(p, q)?;

            let loss = match teacher_logits {
                // lambda == 0 skips the term so the run matches plain
                // low-quality training step for step.
                Some(tl) if cfg.lambda > 0.0 => {
                    let mut rows = Vec::with_capacity(batch.len() * k);
                    for &i in &idx {
                        rows.extend_from_slice(&tl[i * k..(i + 1) * k]);
                    }
                    let t = Tensor::new(vec![batch.len(), k], rows)?;
                    let d = distill_term(&mut g, logits, &t, cfg.loss2_kind, cfg.temperature)?;
                    dist_sum += g.loss_f64(d) * batch.len() as f64;
                    let weighted = g.scale(d, cfg.lambda as f32);
                    g.add(task, weighted)?
                }
                _ => task,
            };

            match g.backward(loss) {
                Ok(()) => {}
                Err(TensorError::NonFinite(what)) => {
                    return Err(DistillError::NonFinite {
                        phase,
                        epoch,
                        batch: bi,
                        source: TensorError::NonFinite(what),
                    });
                }
                Err(e) => return Err(e.into()),
            }
            task_sum += g.loss_f64(task) * batch.len() as f64;
            seen += batch.len();

            let grads: Vec<&Tensor> = params
                .iter()
                .map(|v| g.grad(*v).expect("trainable leaf has a gradient"))
                .collect();
            opt.step(
                &mut model.params,
                &grads,
                lr,
                cfg.momentum,
                cfg.weight_decay,
            )?;
        }

        let eval_accuracy = if data.eval.is_empty() {
            None
        } else {
            Some(eval_with_head(model, set, data.eval_view, data.eval, head)?)
        };
        report.epochs.push(EpochStats {
            phase,
            epoch,
            lr,
            task_loss: task_sum / seen as f64,
            distill_loss: dist_sum / seen as f64,
            eval_accuracy,
        });
    }
    Ok(())
}

/// Fraction of argmax-correct predictions; ties go to the lowest index.
pub fn evaluate(model: &Model, set: &PairedSet, view: View, idx: &[usize]) -> Result<f64> {
    if model.num_classes != set.num_classes() {
        return Err(DistillError::Config(format!(
            "model has a {}-way head but the dataset has {} classes",
            model.num_classes,
            set.num_classes()
        )));
    }
    eval_with_head(model, set, view, idx, HeadMode::Shared)
}

pub(crate) fn eval_with_head(
    model: &Model,
    set: &PairedSet,
    view: View,
    idx: &[usize],
    head: HeadMode,
) -> Result<f64> {
    if idx.is_empty() {
        return Err(DistillError::Data("evaluation index list is empty".into()));
    }
    let k = set.num_classes();
    let offset = head_offset(head, view, k);
    let mut correct = 0usize;
    for chunk in idx.chunks(EVAL_BATCH) {
        let x = set.batch(chunk, view)?;
        let z = model.logits(&x)?;
        let width = z.shape()[1];
        let block = if width == k && offset == 0 {
            z
        } else {
            let mut rows = Vec::with_capacity(chunk.len() * k);
            for r in 0..chunk.len() {
                rows.extend_from_slice(&z.data()[r * width + offset..r * width + offset + k]);
            }
            Tensor::new(vec![chunk.len(), k], rows)?
        };
        let pred = argmax_rows(&block);
        correct += pred
            .iter()
            .zip(chunk)
            .filter(|(p, &i)| **p == set.labels[i] as usize)
            .count();
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Logits of `model` on one view of every sample, row-aligned with the set.
pub(crate) fn logits_over(model: &Model, set: &PairedSet, view: View) -> Result<Vec<f32>> {
    let k = model.num_classes;
    let mut out = vec![0.0f32; set.len() * k];
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let x = set.batch(chunk, view)?;
        let z = model.logits(&x)?;
        for (r, &i) in chunk.iter().enumerate() {
            out[i * k..(i + 1) * k].copy_from_slice(&z.data()[r * k..(r + 1) * k]);
        }
    }
    Ok(out)
}
