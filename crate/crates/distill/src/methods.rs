//! The five training strategies behind a name-keyed registry.
//!
//! Each strategy is a unit struct implementing [`TrainMethod`]; the
//! registry maps stable names to trait objects so callers select one at
//! runtime from a config or CLI flag.

use crate::config::{MethodKind, TrainConfig, WarmStart};
use crate::data::{PairedSet, TrainData, View};
use crate::error::{DistillError, Result};
use crate::report::TrainReport;
use crate::trainer::{evaluate, fit, logits_over, HeadMode, TrainView};
use cqd_nets::{load_checkpoint, ArchSpec, Model};
use std::time::Instant;

pub trait TrainMethod: Sync {
    /// Registry key; also what configs and CLI flags use.
    fn name(&self) -> &'static str;

    /// One line for `--help` style listings.
    fn describe(&self) -> &'static str;

    fn needs_teacher(&self) -> bool {
        false
    }

    /// Trains a student on `data`. `teacher` is a model trained on the
    /// high-quality view; methods that can exploit one receive it here.
    fn run(
        &self,
        cfg: &TrainConfig,
        data: &TrainData,
        teacher: Option<&Model>,
    ) -> Result<(Model, TrainReport)>;
}

pub const METHODS: &[&dyn TrainMethod] =
    &[&HqOnly, &LqOnly, &BothViews, &StagedHqThenLq, &Distilled];

pub fn method_by_name(name: &str) -> Option<&'static dyn TrainMethod> {
    METHODS.iter().copied().find(|m| m.name() == name)
}

pub fn method_for(kind: MethodKind) -> &'static dyn TrainMethod {
    method_by_name(kind.name()).expect("every method kind is registered")
}

/// Front door: validates inputs, loads the configured teacher checkpoint if
/// none was passed, and dispatches on `cfg.method`.
pub fn train(
    cfg: &TrainConfig,
    data: &TrainData,
    teacher: Option<&Model>,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    data.validate()?;
    let method = method_for(cfg.method);
    let loaded;
    let teacher = match (teacher, &cfg.teacher_checkpoint) {
        (Some(t), _) => Some(t),
        (None, Some(path)) => {
            loaded = load_checkpoint(path)?;
            Some(&loaded)
        }
        (None, None) => None,
    };
    if method.needs_teacher() && teacher.is_none() {
        return Err(DistillError::Config(format!(
            "method {:?} needs a teacher model or checkpoint",
            method.name()
        )));
    }
    method.run(cfg, data, teacher)
}

fn student_arch(cfg: &TrainConfig, set: &PairedSet) -> Result<ArchSpec> {
    let img = &set.hq[0];
    if img.height() != img.width() {
        return Err(DistillError::Data(format!(
            "expected square inputs, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    Ok(ArchSpec::by_name(&cfg.student_arch, img.height())?)
}

/// Wraps a single-phase supervised fit on one view.
fn supervised(
    name: &'static str,
    cfg: &TrainConfig,
    data: &TrainData,
    view: View,
) -> Result<(Model, TrainReport)> {
    let start = Instant::now();
    let mut report = TrainReport::new(name, cfg);
    let arch = student_arch(cfg, data.set)?;
    let mut model = Model::new(arch, data.set.num_classes(), cfg.seed)?;
    fit(
        &mut model,
        cfg,
        data,
        TrainView::Single(view),
        HeadMode::Shared,
        None,
        cfg.total_epochs,
        0,
        &mut report,
    )?;
    finish(&model, data, &mut report, start)?;
    Ok((model, report))
}

fn finish(model: &Model, data: &TrainData, report: &mut TrainReport, start: Instant) -> Result<()> {
    if !data.eval.is_empty() {
        report.final_accuracy = Some(evaluate(model, data.set, data.eval_view, data.eval)?);
    }
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(())
}

/// Supervised training on the high-quality view. Doubles as the teacher
/// and the upper bound; evaluating it on the low-quality view measures the
/// cost of doing nothing about the domain gap.
pub struct HqOnly;

impl TrainMethod for HqOnly {
    fn name(&self) -> &'static str {
        "hq"
    }
    fn describe(&self) -> &'static str {
        "supervised training on the high-quality view"
    }
    fn run(
        &self,
        cfg: &TrainConfig,
        data: &TrainData,
        _teacher: Option<&Model>,
    ) -> Result<(Model, TrainReport)> {
        supervised(self.name(), cfg, data, View::Hq)
    }
}

/// Supervised training on the low-quality view only.
pub struct LqOnly;

impl TrainMethod for LqOnly {
    fn name(&self) -> &'static str {
        "lq"
    }
    fn describe(&self) -> &'static str {
        "supervised training on the low-quality view"
    }
    fn run(
        &self,
        cfg: &TrainConfig,
        data: &TrainData,
        _teacher: Option<&Model>,
    ) -> Result<(Model, TrainReport)> {
        supervised(self.name(), cfg, data, View::Lq)
    }
}

/// Supervised training on both views shuffled into one stream, i.e. the
/// low-quality view used as data augmentation. With `separate_heads` each
/// view gets its own classifier rows; the returned model keeps only the
/// low-quality block so it stays a plain k-way classifier.
pub struct BothViews;

impl TrainMethod for BothViews {
    fn name(&self) -> &'static str {
        "both"
    }
    fn describe(&self) -> &'static str {
        "supervised training on both views mixed together"
    }
    fn run(
        &self,
        cfg: &TrainConfig,
        data: &TrainData,
        _teacher: Option<&Model>,
    ) -> Result<(Model, TrainReport)> {
        let start = Instant::now();
        let mut report = TrainReport::new(self.name(), cfg);
        let arch = student_arch(cfg, data.set)?;
        let k = data.set.num_classes();
        if !cfg.separate_heads {
            let mut model = Model::new(arch, k, cfg.seed)?;
            fit(
                &mut model,
                cfg,
                data,
                TrainView::Union,
                HeadMode::Shared,
                None,
                cfg.total_epochs,
                0,
                &mut report,
            )?;
            finish(&model, data, &mut report, start)?;
            return Ok((model, report));
        }

        let mut wide = Model::new(arch.clone(), 2 * k, cfg.seed)?;
        fit(
            &mut wide,
            cfg,
            data,
            TrainView::Union,
            HeadMode::Split,
            None,
            cfg.total_epochs,
            0,
            &mut report,
        )?;
        let model = extract_lq_head(&wide, k, cfg.seed)?;
        finish(&model, data, &mut report, start)?;
        Ok((model, report))
    }
}

/// Copies the trunk of a split-head model and keeps the low-quality block
/// of the classifier, yielding an ordinary k-way model.
fn extract_lq_head(wide: &Model, k: usize, seed: u64) -> Result<Model> {
    let mut model = Model::new(wide.arch.clone(), k, seed)?;
    let n = model.params.len();
    for i in 0..n - 2 {
        model.params[i] = wide.params[i].clone();
    }
    let ww = &wide.params[n - 2];
    let (rows, wide_cols) = (ww.shape()[0], ww.shape()[1]);
    let mut w = Vec::with_capacity(rows * k);
    for r in 0..rows {
        w.extend_from_slice(&ww.data()[r * wide_cols + k..r * wide_cols + 2 * k]);
    }
    model.params[n - 2] = cqd_tensor::Tensor::new(vec![rows, k], w)?;
    model.params[n - 1] =
        cqd_tensor::Tensor::new(vec![k], wide.params[n - 1].data()[k..2 * k].to_vec())?;
    model.validate()?;
    Ok(model)
}

/// Trains on the high-quality view first, then keeps fine-tuning the same
/// parameters on the low-quality view. When a teacher is supplied it serves
/// as the finished first phase, since it is exactly that model.
pub struct StagedHqThenLq;

impl TrainMethod for StagedHqThenLq {
    fn name(&self) -> &'static str {
        "staged"
    }
    fn describe(&self) -> &'static str {
        "high-quality training continued on the low-quality view"
    }
    fn run(
        &self,
        cfg: &TrainConfig,
        data: &TrainData,
        teacher: Option<&Model>,
    ) -> Result<(Model, TrainReport)> {
        // continuing across views only makes sense in one parameter space
        if cfg.teacher_arch != cfg.student_arch {
            return Err(DistillError::Config(format!(
                "staged training needs one architecture for both phases, got {:?} and {:?}",
                cfg.teacher_arch, cfg.student_arch
            )));
        }
        let start = Instant::now();
        let mut report = TrainReport::new(self.name(), cfg);
        let arch = student_arch(cfg, data.set)?;
        let k = data.set.num_classes();

        let mut model = match teacher {
            Some(t) => {
                if t.arch != arch || t.num_classes != k {
                    return Err(DistillError::Config(
                        "teacher does not match the configured student shape".into(),
                    ));
                }
                t.clone()
            }
            None => {
                let mut m = Model::new(arch, k, cfg.seed)?;
                let stage_one = cfg.stage_one_epochs.unwrap_or(cfg.total_epochs);
                fit(
                    &mut m,
                    cfg,
                    data,
                    TrainView::Single(View::Hq),
                    HeadMode::Shared,
                    None,
                    stage_one,
                    0,
                    &mut report,
                )?;
                m
            }
        };
        fit(
            &mut model,
            cfg,
            data,
            TrainView::Single(View::Lq),
            HeadMode::Shared,
            None,
            cfg.total_epochs,
            1,
            &mut report,
        )?;
        finish(&model, data, &mut report, start)?;
        Ok((model, report))
    }
}

/// Trains the student on the low-quality view against both the labels and
/// the frozen teacher's predictions on the paired high-quality view.
pub struct Distilled;

impl TrainMethod for Distilled {
    fn name(&self) -> &'static str {
        "distill"
    }
    fn describe(&self) -> &'static str {
        "low-quality student guided by a high-quality teacher"
    }
    fn needs_teacher(&self) -> bool {
        true
    }
    fn run(
        &self,
        cfg: &TrainConfig,
        data: &TrainData,
        teacher: Option<&Model>,
    ) -> Result<(Model, TrainReport)> {
        let teacher = teacher.ok_or_else(|| {
            DistillError::Config("distillation needs a teacher model or checkpoint".into())
        })?;
        let k = data.set.num_classes();
        if teacher.num_classes != k {
            return Err(DistillError::Config(format!(
                "teacher has a {}-way head but the dataset has {k} classes",
                teacher.num_classes
            )));
        }
        let start = Instant::now();
        let mut report = TrainReport::new(self.name(), cfg);
        let arch = student_arch(cfg, data.set)?;

        let same_shape = teacher.arch == arch;
        let mut model = match cfg.warm_start {
            WarmStart::Fresh => Model::new(arch, k, cfg.seed)?,
            WarmStart::FromTeacher => {
                if !same_shape {
                    return Err(DistillError::Config(
                        "warm start from the teacher needs matching architectures".into(),
                    ));
                }
                teacher.clone()
            }
            WarmStart::Auto => {
                if same_shape {
                    teacher.clone()
                } else {
                    Model::new(arch, k, cfg.seed)?
                }
            }
        };

        // the teacher only ever runs inference, on the paired clean views
        let teacher_logits = logits_over(teacher, data.set, View::Hq)?;
        fit(
            &mut model,
            cfg,
            data,
            TrainView::Single(View::Lq),
            HeadMode::Shared,
            Some(&teacher_logits),
            cfg.total_epochs,
            0,
            &mut report,
        )?;
        finish(&model, data, &mut report, start)?;
        Ok((model, report))
    }
}
