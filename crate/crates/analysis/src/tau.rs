//! The localization fraction: how much gradient mass falls inside the
//! object's bounding box, compared between two models over a dataset.

use std::path::Path;

use cqd_degrade::{BBox, Image};
use cqd_nets::Model;
use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};
use crate::saliency::{input_gradient, pixel_grad_norm, Saliency};

/// In-box saliency mass over total mass. A model that only ever looks at
/// the object scores 1; a model attending uniformly scores the box's area
/// fraction. Invariant under positive rescaling of the map.
pub fn tau(s: &Saliency, bbox: &BBox) -> Result<f64> {
    let mut inside = 0.0f64;
    let mut total = 0.0f64;
    for y in 0..s.height() {
        for x in 0..s.width() {
            let v = s.values()[y * s.width() + x] as f64;
            total += v;
            if bbox.contains_pixel(x, y) {
                inside += v;
            }
        }
    }
    if total <= 0.0 {
        return Err(AnalysisError::ZeroMass);
    }
    Ok((inside / total).clamp(0.0, 1.0))
}

/// One comparison input: an image with its label and, when known, the
/// ground-truth object box.
pub struct TauItem<'a> {
    pub id: &'a str,
    pub image: &'a Image,
    pub label: u32,
    pub bbox: Option<BBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub image_id: String,
    pub tau_b: f64,
    pub tau_cqd: f64,
    pub bbox: BBox,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauSummary {
    pub records: usize,
    pub skipped: usize,
    /// `None` when there are no records: the means are undefined.
    pub mean_tau_b: Option<f64>,
    pub mean_tau_cqd: Option<f64>,
    /// Fraction of records where the distilled model keeps strictly more
    /// gradient mass in the box than the baseline.
    pub cqd_win_fraction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Skip {
    pub image_id: String,
    pub reason: String,
}

pub struct ScatterOutcome {
    pub records: Vec<TauRecord>,
    pub summary: TauSummary,
    pub skipped: Vec<Skip>,
}

/// Computes per-image τ for two models over at most `n` images, in image-id
/// order. Items without a box, and maps without mass, are skipped and
/// reported rather than failing the batch.
pub fn tau_scatter(
    baseline: &Model,
    distilled: &Model,
    items: &[TauItem],
    n: usize,
) -> Result<ScatterOutcome> {
    if baseline.arch.input != distilled.arch.input {
        return Err(AnalysisError::Contract(format!(
            "models disagree on the input contract: {:?} vs {:?}",
            baseline.arch.input, distilled.arch.input
        )));
    }

    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| items[i].id);

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for &i in &order {
        if records.len() == n {
            break;
        }
        let item = &items[i];
        let Some(bbox) = item.bbox else {
            skipped.push(Skip {
                image_id: item.id.to_string(),
                reason: "no bounding box".into(),
            });
            continue;
        };
        let mut taus = [0.0f64; 2];
        let mut dead = None;
        for (slot, model) in [(0, baseline), (1, distilled)] {
            let sal = pixel_grad_norm(&input_gradient(model, item.image, item.label)?);
            match tau(&sal, &bbox) {
                Ok(t) => taus[slot] = t,
                Err(AnalysisError::ZeroMass) => {
                    dead = Some(if slot == 0 { "baseline" } else { "distilled" });
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(which) = dead {
            skipped.push(Skip {
                image_id: item.id.to_string(),
                reason: format!("zero saliency mass under the {which} model"),
            });
            continue;
        }
        records.push(TauRecord {
            image_id: item.id.to_string(),
            tau_b: taus[0],
            tau_cqd: taus[1],
            bbox,
        });
    }

    let summary = summarize(&records, skipped.len());
    Ok(ScatterOutcome {
        records,
        summary,
        skipped,
    })
}

pub fn summarize(records: &[TauRecord], skipped: usize) -> TauSummary {
    if records.is_empty() {
        return TauSummary {
            records: 0,
            skipped,
            mean_tau_b: None,
            mean_tau_cqd: None,
            cqd_win_fraction: None,
        };
    }
    let n = records.len() as f64;
    let wins = records.iter().filter(|r| r.tau_cqd > r.tau_b).count();
    TauSummary {
        records: records.len(),
        skipped,
        mean_tau_b: Some(records.iter().map(|r| r.tau_b).sum::<f64>() / n),
        mean_tau_cqd: Some(records.iter().map(|r| r.tau_cqd).sum::<f64>() / n),
        cqd_win_fraction: Some(wins as f64 / n),
    }
}

const SCATTER_HEADER: [&str; 7] = [
    "image_id", "tau_b", "tau_cqd", "box_x0", "box_y0", "box_x1", "box_y1",
];

pub fn write_scatter_csv(path: &Path, records: &[TauRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SCATTER_HEADER)?;
    for r in records {
        w.write_record([
            r.image_id.clone(),
            r.tau_b.to_string(),
            r.tau_cqd.to_string(),
            r.bbox.x0.to_string(),
            r.bbox.y0.to_string(),
            r.bbox.x1.to_string(),
            r.bbox.y1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scatter_csv(path: &Path) -> Result<Vec<TauRecord>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header = rd.headers()?.clone();
    if header.iter().ne(SCATTER_HEADER) {
        return Err(AnalysisError::Contract(format!(
            "unexpected scatter header: {header:?}"
        )));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| AnalysisError::Contract(format!("short row: {row:?}")))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| AnalysisError::Contract(format!("bad number in {row:?}: {e}")))
        };
        out.push(TauRecord {
            image_id: field(0)?.to_string(),
            tau_b: num(1)?,
            tau_cqd: num(2)?,
            bbox: BBox::new(
                num(3)? as f32,
                num(4)? as f32,
                num(5)? as f32,
                num(6)? as f32,
            ),
        });
    }
    Ok(out)
}

pub fn write_summary_json(path: &Path, summary: &TauSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text)?;
    Ok(())
}
