//! Import/export of image folders with a `labels.csv` index.
//!
//! The CSV has a header `id,path,label,x0,y0,x1,y1`; `label` is a class
//! name, box columns are either all present or all empty. Import accepts
//! any image format the `image` crate can open; export writes 8-bit PNGs.

use crate::error::{DataError, Result};
use cqd_degrade::io::{encode_image, Encoding, LabeledSample};
use cqd_degrade::{BBox, Image};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    path: String,
    label: String,
    x0: Option<f32>,
    y0: Option<f32>,
    x1: Option<f32>,
    y1: Option<f32>,
}

pub fn export_image_dir(dir: &Path, classes: &[String], samples: &[LabeledSample]) -> Result<()> {
    fs::create_dir_all(dir.join("images"))?;
    let mut writer = csv::Writer::from_path(dir.join("labels.csv"))?;
    for s in samples {
        let class = classes.get(s.label as usize).ok_or_else(|| {
            DataError::Labels(format!(
                "sample {:?} label {} has no class name",
                s.id, s.label
            ))
        })?;
        let rel = format!("images/{}.png", s.id);
        fs::write(dir.join(&rel), encode_image(&s.image, Encoding::Png8)?)?;
        writer.serialize(Row {
            id: s.id.clone(),
            path: rel,
            label: class.clone(),
            x0: s.bbox.map(|b| b.x0),
            y0: s.bbox.map(|b| b.y0),
            x1: s.bbox.map(|b| b.x1),
            y1: s.bbox.map(|b| b.y1),
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads `labels.csv` and the images it references. Class indices follow
/// the sorted order of distinct label names.
pub fn import_image_dir(dir: &Path) -> Result<(Vec<String>, Vec<LabeledSample>)> {
    let csv_path = dir.join("labels.csv");
    if !csv_path.is_file() {
        return Err(DataError::Labels(format!(
            "{} not found",
            csv_path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(&csv_path)?;
    let rows: Vec<Row> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(DataError::Labels("labels.csv lists no samples".into()));
    }

    let mut class_ids: BTreeMap<String, u32> = BTreeMap::new();
    for r in &rows {
        let next = class_ids.len() as u32;
        class_ids.entry(r.label.clone()).or_insert(next);
    }
    // BTreeMap iterates sorted; renumber so indices follow name order
    let classes: Vec<String> = class_ids.keys().cloned().collect();
    for (i, name) in classes.iter().enumerate() {
        class_ids.insert(name.clone(), i as u32);
    }

    let mut seen = std::collections::HashSet::new();
    let mut samples = Vec::with_capacity(rows.len());
    for r in rows {
        if !seen.insert(r.id.clone()) {
            return Err(DataError::Labels(format!("duplicate id {:?}", r.id)));
        }
        let bbox = match (r.x0, r.y0, r.x1, r.y1) {
            (Some(x0), Some(y0), Some(x1), Some(y1)) => Some(BBox::new(x0, y0, x1, y1)),
            (None, None, None, None) => None,
            _ => {
                return Err(DataError::Labels(format!(
                    "sample {:?} has a partial bounding box",
                    r.id
                )))
            }
        };
        let img_path = dir.join(&r.path);
        let dynimg = image::open(&img_path)
            .map_err(|e| DataError::Labels(format!("cannot open {}: {e}", img_path.display())))?;
        let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
        let rgb = dynimg.into_rgb8();
        let image = Image::new(
            h,
            w,
            3,
            rgb.into_raw().iter().map(|&b| b as f32 / 255.0).collect(),
        )?;
        samples.push(LabeledSample {
            id: r.id,
            label: class_ids[&r.label],
            bbox,
            image,
        });
    }
    Ok((classes, samples))
}
