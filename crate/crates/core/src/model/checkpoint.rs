//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic "HANDDICK" | u32 version | u8 precision bits
//! u32 len | config echo (UTF-8)
//! u32 tensor count
//! per tensor: u32 len | name | u32 rank | u64 extents.. | payload
//! ```

use std::path::Path;

use super::{AttentionOverride, HanModel, ModelConfig, ModelParams, Variant};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::tensor::{Real, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HANDDICK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor<T: Real>(out: &mut Vec<u8>, name: &str, t: &Tensor<T>) {
    put_str(out, name);
    put_u32(out, t.shape().len() as u32);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(out);
    }
}

fn echo<T: Real>(model: &HanModel<T>) -> String {
    format!(
        "{}metapaths={}\nvariant={}\n",
        model.config.to_text(),
        model.metapaths.join(","),
        model.variant
    )
}

pub fn encode_checkpoint<T: Real>(model: &HanModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    out.push(T::BITS);
    put_str(&mut out, &echo(model));

    let mut tensors: Vec<(String, &Tensor<T>)> = model.params.named();
    let fixed_beta = model
        .overrides
        .beta
        .as_ref()
        .map(|b| Tensor::matrix(1, b.len(), b.clone()).expect("non-empty"));
    if let Some(alpha) = &model.overrides.alpha {
        tensors.extend(
            alpha
                .iter()
                .enumerate()
                .map(|(v, a)| (format!("fixed_alpha.{v}"), a)),
        );
    }
    if let Some(beta) = &fixed_beta {
        tensors.push(("fixed_beta".to_string(), beta));
    }
    put_u32(&mut out, tensors.len() as u32);
    for (name, t) in tensors {
        put_tensor(&mut out, &name, t);
    }
    out
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
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("checkpoint string is not UTF-8".into()))
    }

    fn tensor<T: Real>(&mut self) -> Result<(String, Tensor<T>)> {
        let name = self.string()?;
        let rank = self.u32()? as usize;
        let shape = (0..rank)
            .map(|_| self.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("tensor {name} is too large")))?;
        let width = (T::BITS / 8) as usize;
        let payload = self.take(count.saturating_mul(width))?;
        let data = payload.chunks_exact(width).map(T::read_le).collect();
        Ok((name, Tensor::new(shape, data)?))
    }
}

fn header(bytes: &[u8]) -> Result<(Reader<'_>, u8)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let bits = r.take(1)?[0];
    Ok((r, bits))
}

/// Precision bits (32 or 64) recorded in a checkpoint header.
pub fn checkpoint_precision(bytes: &[u8]) -> Result<u8> {
    header(bytes).map(|(_, bits)| bits)
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<HanModel<T>> {
    let (mut r, bits) = header(bytes)?;
    if bits != T::BITS {
        return Err(Error::Format(format!(
            "checkpoint holds {bits}-bit values, expected {}",
            T::BITS
        )));
    }
    let text = r.string()?;
    let config = ModelConfig::from_text(&text)?;
    let mut metapaths = Vec::new();
    let mut variant = Variant::Full;
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("metapaths=") {
            metapaths = v
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
        } else if let Some(v) = line.strip_prefix("variant=") {
            variant = v.parse()?;
        }
    }

    let count = r.u32()? as usize;
    let mut params = Vec::new();
    let mut alpha = Vec::new();
    let mut beta = None;
    for _ in 0..count {
        let (name, t) = r.tensor::<T>()?;
        if name.starts_with("fixed_alpha.") {
            alpha.push(t);
        } else if name == "fixed_beta" {
            beta = Some(t.into_data());
        } else {
            params.push(t);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let params = ModelParams::from_tensors(&config, metapaths.len(), params)?;
    let overrides = AttentionOverride {
        alpha: (!alpha.is_empty()).then_some(alpha),
        beta,
    };
    HanModel::from_parts(config, metapaths, variant, params, overrides)
}

pub fn save_checkpoint<T: Real>(path: &Path, model: &HanModel<T>) -> Result<()> {
    write_atomic(path, &encode_checkpoint(model))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<HanModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
