//! Binary checkpoint format.
//!
//! Layout: magic `CQDC`, `u16` little-endian version, `u32` little-endian
//! header length, a UTF-8 JSON header describing the architecture and tensor
//! table, then the raw little-endian `f32` payload. Offsets in the table are
//! element counts from the start of the payload, so the header stays
//! readable with a text tool and the payload stays mmap-friendly.

use crate::arch::ArchSpec;
use crate::error::{NetError, Result};
use crate::model::{param_names, param_shapes, Model};
use cqd_tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"CQDC";
const VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Element offset into the payload.
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: ArchSpec,
    num_classes: usize,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(path: &Path, model: &Model) -> Result<()> {
    model.validate()?;
    let names = param_names(&model.arch);
    let mut tensors = Vec::with_capacity(model.params.len());
    let mut offset = 0u64;
    for (name, t) in names.iter().zip(&model.params) {
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.numel() as u64;
    }
    let header = serde_json::to_vec(&Header {
        arch: model.arch.clone(),
        num_classes: model.num_classes,
        tensors,
    })
    .map_err(|e| NetError::Header(e.to_string()))?;

    let mut out = Vec::with_capacity(4 + 2 + 4 + header.len() + offset as usize * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for t in &model.params {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = fs::read(path)?;
    if bytes.len() < 10 {
        return Err(NetError::Truncated {
            need: 10,
            have: bytes.len() as u64,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(NetError::Format(format!(
            "bad magic {:02x?} in {}",
            &bytes[..4],
            path.display()
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(NetError::Version { found: version });
    }
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let payload_start = 10 + header_len;
    if bytes.len() < payload_start {
        return Err(NetError::Truncated {
            need: payload_start as u64,
            have: bytes.len() as u64,
        });
    }
    let header: Header = serde_json::from_slice(&bytes[10..payload_start])
        .map_err(|e| NetError::Header(e.to_string()))?;

    let want_shapes = param_shapes(&header.arch, header.num_classes)?;
    let want_names = param_names(&header.arch);
    if header.tensors.len() != want_shapes.len() {
        return Err(NetError::Shape(format!(
            "table has {} tensors, architecture needs {}",
            header.tensors.len(),
            want_shapes.len()
        )));
    }

    let payload = &bytes[payload_start..];
    let mut params = Vec::with_capacity(header.tensors.len());
    let mut expected_offset = 0u64;
    for ((entry, want_shape), want_name) in header.tensors.iter().zip(&want_shapes).zip(&want_names)
    {
        if &entry.name != want_name || &entry.shape != want_shape {
            return Err(NetError::Shape(format!(
                "entry {:?} {:?}, expected {:?} {:?}",
                entry.name, entry.shape, want_name, want_shape
            )));
        }
        if entry.offset != expected_offset {
            return Err(NetError::Payload(format!(
                "entry {:?} at offset {}, expected {}",
                entry.name, entry.offset, expected_offset
            )));
        }
        let numel: usize = entry.shape.iter().product();
        let byte_start = entry.offset as usize * 4;
        let byte_end = byte_start + numel * 4;
        if byte_end > payload.len() {
            return Err(NetError::Truncated {
                need: (payload_start + byte_end) as u64,
                have: bytes.len() as u64,
            });
        }
        let data: Vec<f32> = payload[byte_start..byte_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        params.push(Tensor::new(entry.shape.clone(), data)?);
        expected_offset += numel as u64;
    }
    if payload.len() != expected_offset as usize * 4 {
        return Err(NetError::Payload(format!(
            "payload is {} bytes, table covers {}",
            payload.len(),
            expected_offset * 4
        )));
    }

    let model = Model {
        arch: header.arch,
        num_classes: header.num_classes,
        params,
    };
    model.validate()?;
    Ok(model)
}
