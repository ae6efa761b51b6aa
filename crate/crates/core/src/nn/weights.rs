//! Binary weight files.
//!
//! Layout (little endian): magic `ICIW`, version `u32`, tensor count `u32`,
//! then per tensor: name length `u32`, UTF-8 name, rank `u32`, dims `u32`
//! each, and the values as `f32`.

use std::path::Path;

use super::network::ModelParams;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::fsutil::{put_f32, put_u32, write_atomic, Reader};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"ICIW";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn encode_weights<F: Real>(params: &ModelParams<F>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    put_u32(&mut out, WEIGHTS_VERSION);
    put_u32(&mut out, params.len() as u32);
    for (name, t) in params.entries() {
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len() as u32);
        for d in t.shape() {
            put_u32(&mut out, *d as u32);
        }
        for v in t.data() {
            put_f32(&mut out, v.as_f64() as f32);
        }
    }
    out
}

pub fn decode_weights<F: Real>(bytes: &[u8]) -> Result<ModelParams<F>> {
    let mut r = Reader::new(bytes, "weight file");
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(Error::Format("not a weight file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Format(format!("unsupported weight file version {version}")));
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, d| a.checked_mul(*d));
        let n = n.ok_or_else(|| Error::Format(format!("tensor `{name}` is too large")))?;
        let data = r.f32_vec(n)?.into_iter().map(|v| F::of(v as f64)).collect();
        entries.push((name, Tensor::from_vec(&shape, data)?));
    }
    if !r.is_done() {
        return Err(Error::Format(format!("{}: trailing bytes", r.what())));
    }
    Ok(ModelParams::new(entries))
}

pub fn save_weights<F: Real>(params: &ModelParams<F>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_weights(params))
}

pub fn load_weights<F: Real>(path: &Path) -> Result<ModelParams<F>> {
    decode_weights(&std::fs::read(path)?)
}
