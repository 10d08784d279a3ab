//! Model file: `BRCM`, format version (u32), header length (u32) and JSON header
//! holding the configuration and seed, then the feature scaler and every
//! parameter tensor as `ndim (u32), dims (u32 each), data (f64 each)`. All
//! integers and floats are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ClassifierModel, FeatureScaler, ModelConfig, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BRCM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    rng_seed: u64,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn model_to_bytes(model: &ClassifierModel) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        rng_seed: model.rng_seed,
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, header.len() as u32);
    out.extend_from_slice(&header);
    put_u32(&mut out, model.scaler.mean.len() as u32);
    put_f64s(&mut out, &model.scaler.mean);
    put_f64s(&mut out, &model.scaler.std);
    for t in model.params.tensors() {
        put_u32(&mut out, t.shape.len() as u32);
        for &d in &t.shape {
            put_u32(&mut out, d as u32);
        }
        put_f64s(&mut out, &t.data);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::ModelFormat(format!("file truncated at byte {}", self.bytes.len())))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::ModelFormat("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ClassifierModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::ModelFormat("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported model format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?)?;
    let mut params = Params::zeros(&header.config)?;

    let dim = r.u32()? as usize;
    if dim != header.config.pair_dim {
        return Err(Error::ModelFormat(format!(
            "scaler width {dim} does not match pair dimension {}",
            header.config.pair_dim
        )));
    }
    let scaler = FeatureScaler {
        mean: r.f64s(dim)?,
        std: r.f64s(dim)?,
    };
    for (name, slot) in Params::NAMES.iter().zip(params.tensors_mut()) {
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        if shape != slot.shape {
            return Err(Error::ModelFormat(format!(
                "{name} has shape {shape:?}, configuration implies {:?}",
                slot.shape
            )));
        }
        let data = r.f64s(slot.len())?;
        *slot = Tensor::from_vec(&shape, data);
    }
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    if !params.is_finite() {
        return Err(Error::ModelFormat("model contains non-finite weights".into()));
    }
    Ok(ClassifierModel {
        config: header.config,
        params,
        scaler,
        rng_seed: header.rng_seed,
    })
}

pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<()> {
    let bytes = model_to_bytes(model)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ClassifierModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
