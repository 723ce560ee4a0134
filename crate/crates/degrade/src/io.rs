//! Dataset storage: image files plus a `manifest.json` that records how the
//! dataset was made and a content hash per file, so stale or tampered
//! artifacts are caught at load time instead of corrupting results.

use crate::bbox::BBox;
use crate::error::{DegradeError, Result};
use crate::image_buf::Image;
use crate::registry::TransformDescriptor;
use cqd_tensor::rng::{derive_seed, seeded_rng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub const MANIFEST_VERSION: u32 = 1;
const BLOB_MAGIC: &[u8; 4] = b"CQDI";
const BLOB_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Raw little-endian f32 blob; lossless.
    F32Raw,
    /// 8-bit PNG; quantizes to 1/255 steps.
    Png8,
}

impl Encoding {
    pub fn extension(self) -> &'static str {
        match self {
            Encoding::F32Raw => "cqdi",
            Encoding::Png8 => "png",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Labeled,
    Paired,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileRef {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<FileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hq: Option<FileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lq: Option<FileRef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: DatasetKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformDescriptor>,
    pub encoding: Encoding,
    pub classes: Vec<String>,
    pub samples: Vec<SampleEntry>,
}

impl Manifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_vec_pretty(self)?;
        fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let bytes = fs::read(&path)
            .map_err(|e| DegradeError::Manifest(format!("cannot read {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_slice(&bytes)?;
        if m.format_version != MANIFEST_VERSION {
            return Err(DegradeError::Manifest(format!(
                "format_version {} unsupported (expected {MANIFEST_VERSION})",
                m.format_version
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &m.samples {
            if !seen.insert(&s.id) {
                return Err(DegradeError::Manifest(format!(
                    "duplicate sample id {:?}",
                    s.id
                )));
            }
            for label_check in [s.label] {
                if label_check as usize >= m.classes.len() {
                    return Err(DegradeError::Manifest(format!(
                        "sample {:?} label {} outside {} classes",
                        s.id,
                        s.label,
                        m.classes.len()
                    )));
                }
            }
        }
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(hex, "{b:02x}").expect("hex encode");
    }
    hex
}

// ---------------------------------------------------------------------------
// Single-image encoding
// ---------------------------------------------------------------------------

pub fn encode_image(img: &Image, enc: Encoding) -> Result<Vec<u8>> {
    match enc {
        Encoding::F32Raw => {
            let mut out = Vec::with_capacity(4 + 2 + 12 + img.data().len() * 4);
            out.extend_from_slice(BLOB_MAGIC);
            out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
            out.extend_from_slice(&(img.height() as u32).to_le_bytes());
            out.extend_from_slice(&(img.width() as u32).to_le_bytes());
            out.extend_from_slice(&(img.channels() as u32).to_le_bytes());
            for v in img.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            Ok(out)
        }
        Encoding::Png8 => {
            let (h, w, c) = (img.height() as u32, img.width() as u32, img.channels());
            let quant = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            let bytes: Vec<u8> = img.data().iter().map(|&v| quant(v)).collect();
            let mut out = Vec::new();
            let encoder = image::codecs::png::PngEncoder::new(&mut out);
            use image::ImageEncoder;
            let color = match c {
                1 => image::ExtendedColorType::L8,
                3 => image::ExtendedColorType::Rgb8,
                n => {
                    return Err(DegradeError::Contract(format!(
                        "png8 supports 1 or 3 channels, image has {n}"
                    )))
                }
            };
            encoder.write_image(&bytes, w, h, color)?;
            Ok(out)
        }
    }
}

pub fn decode_image(bytes: &[u8], enc: Encoding) -> Result<Image> {
    match enc {
        Encoding::F32Raw => {
            if bytes.len() < 18 {
                return Err(DegradeError::Contract("image blob too short".into()));
            }
            if &bytes[..4] != BLOB_MAGIC {
                return Err(DegradeError::Contract(format!(
                    "bad image blob magic {:02x?}",
                    &bytes[..4]
                )));
            }
            let version = u16::from_le_bytes([bytes[4], bytes[5]]);
            if version != BLOB_VERSION {
                return Err(DegradeError::Contract(format!(
                    "unsupported image blob version {version}"
                )));
            }
            let rd = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
            let (h, w, c) = (rd(6), rd(10), rd(14));
            let need = 18 + h * w * c * 4;
            if bytes.len() != need {
                return Err(DegradeError::Contract(format!(
                    "image blob is {} bytes, dims {h}x{w}x{c} need {need}",
                    bytes.len()
                )));
            }
            let data: Vec<f32> = bytes[18..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            Image::new(h, w, c, data)
        }
        Encoding::Png8 => {
            let dynimg = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
            let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
            match dynimg {
                image::DynamicImage::ImageLuma8(buf) => Image::new(
                    h,
                    w,
                    1,
                    buf.into_raw().iter().map(|&b| b as f32 / 255.0).collect(),
                ),
                other => {
                    let rgb = other.into_rgb8();
                    Image::new(
                        h,
                        w,
                        3,
                        rgb.into_raw().iter().map(|&b| b as f32 / 255.0).collect(),
                    )
                }
            }
        }
    }
}

/// Writes the image and returns a manifest-relative [`FileRef`].
fn write_view(dir: &Path, rel: &str, img: &Image, enc: Encoding) -> Result<FileRef> {
    let bytes = encode_image(img, enc)?;
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, &bytes)?;
    Ok(FileRef {
        path: rel.to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Reads a referenced image and verifies its content hash.
pub fn read_view(dir: &Path, fref: &FileRef, enc: Encoding) -> Result<Image> {
    let path = dir.join(&fref.path);
    let bytes = fs::read(&path)?;
    if sha256_hex(&bytes) != fref.sha256 {
        return Err(DegradeError::HashMismatch {
            path: path.display().to_string(),
        });
    }
    decode_image(&bytes, enc)
}

// ---------------------------------------------------------------------------
// Labeled datasets (plain image + label + optional box)
// ---------------------------------------------------------------------------

pub struct LabeledSample {
    pub id: String,
    pub label: u32,
    pub bbox: Option<BBox>,
    pub image: Image,
}

pub fn save_labeled(
    dir: &Path,
    classes: &[String],
    samples: &[LabeledSample],
    encoding: Encoding,
    seed: u64,
) -> Result<Manifest> {
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let rel = format!("images/{}.{}", s.id, encoding.extension());
        let fref = write_view(dir, &rel, &s.image, encoding)?;
        entries.push(SampleEntry {
            id: s.id.clone(),
            label: s.label,
            bbox: s.bbox,
            image: Some(fref),
            hq: None,
            lq: None,
        });
    }
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        kind: DatasetKind::Labeled,
        seed,
        transform: None,
        encoding,
        classes: classes.to_vec(),
        samples: entries,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

pub fn load_labeled(dir: &Path) -> Result<(Manifest, Vec<LabeledSample>)> {
    let manifest = Manifest::load(dir)?;
    if manifest.kind != DatasetKind::Labeled {
        return Err(DegradeError::Manifest(format!(
            "expected a labeled dataset in {}, found {:?}",
            dir.display(),
            manifest.kind
        )));
    }
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let fref = entry.image.as_ref().ok_or_else(|| {
            DegradeError::Manifest(format!("labeled sample {:?} has no image", entry.id))
        })?;
        samples.push(LabeledSample {
            id: entry.id.clone(),
            label: entry.label,
            bbox: entry.bbox,
            image: read_view(dir, fref, manifest.encoding)?,
        });
    }
    Ok((manifest, samples))
}

// ---------------------------------------------------------------------------
// Paired datasets (hq + lq views)
// ---------------------------------------------------------------------------

pub struct PairedSample {
    pub id: String,
    pub label: u32,
    pub bbox: Option<BBox>,
    pub hq: Image,
    pub lq: Image,
}

pub fn load_paired(dir: &Path) -> Result<(Manifest, Vec<PairedSample>)> {
    let manifest = Manifest::load(dir)?;
    if manifest.kind != DatasetKind::Paired {
        return Err(DegradeError::Manifest(format!(
            "expected a paired dataset in {}, found {:?}",
            dir.display(),
            manifest.kind
        )));
    }
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let hq = entry.hq.as_ref().ok_or_else(|| {
            DegradeError::Manifest(format!("paired sample {:?} has no hq view", entry.id))
        })?;
        let lq = entry.lq.as_ref().ok_or_else(|| {
            DegradeError::Manifest(format!("paired sample {:?} has no lq view", entry.id))
        })?;
        samples.push(PairedSample {
            id: entry.id.clone(),
            label: entry.label,
            bbox: entry.bbox,
            hq: read_view(dir, hq, manifest.encoding)?,
            lq: read_view(dir, lq, manifest.encoding)?,
        });
    }
    Ok((manifest, samples))
}

/// Outcome of deriving a paired dataset; skipped samples carry the reason.
pub struct PairReport {
    pub written: usize,
    pub skipped: Vec<(String, String)>,
}

/// Derives a paired dataset from a labeled one. Each sample gets its own
/// RNG stream from `derive_seed(seed, index)`, so a sample's views do not
/// depend on how many neighbors were skipped. Samples the transform cannot
/// handle (e.g. no box where one is required) are reported, not fatal.
pub fn make_paired(
    labeled_dir: &Path,
    out_dir: &Path,
    desc: &TransformDescriptor,
    encoding: Encoding,
    seed: u64,
) -> Result<PairReport> {
    let manifest = Manifest::load(labeled_dir)?;
    if manifest.kind != DatasetKind::Labeled {
        return Err(DegradeError::Manifest(format!(
            "expected a labeled dataset in {}, found {:?}",
            labeled_dir.display(),
            manifest.kind
        )));
    }
    let transform = desc.build();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (idx, entry) in manifest.samples.iter().enumerate() {
        let fref = match entry.image.as_ref() {
            Some(f) => f,
            None => {
                skipped.push((entry.id.clone(), "no image file".into()));
                continue;
            }
        };
        if transform.needs_box() && entry.bbox.is_none() {
            skipped.push((entry.id.clone(), "transform needs a bounding box".into()));
            continue;
        }
        let img = read_view(labeled_dir, fref, manifest.encoding)?;
        let mut rng = seeded_rng(derive_seed(seed, idx as u64));
        let views = match transform.make_views(&img, entry.bbox.as_ref(), &mut rng) {
            Ok(v) => v,
            Err(e) => {
                skipped.push((entry.id.clone(), e.to_string()));
                continue;
            }
        };
        let ext = encoding.extension();
        let hq = write_view(
            out_dir,
            &format!("hq/{}.{ext}", entry.id),
            &views.hq,
            encoding,
        )?;
        let lq = write_view(
            out_dir,
            &format!("lq/{}.{ext}", entry.id),
            &views.lq,
            encoding,
        )?;
        entries.push(SampleEntry {
            id: entry.id.clone(),
            label: entry.label,
            bbox: entry.bbox,
            image: None,
            hq: Some(hq),
            lq: Some(lq),
        });
    }
    let written = entries.len();
    Manifest {
        format_version: MANIFEST_VERSION,
        kind: DatasetKind::Paired,
        seed,
        transform: Some(desc.clone()),
        encoding,
        classes: manifest.classes.clone(),
        samples: entries,
    }
    .save(out_dir)?;
    Ok(PairReport { written, skipped })
}
