//! Checkpoint serialization.
//!
//! Little-endian binary layout: magic "HLTC", u32 version, u32 tensor count,
//! then per tensor: u8 name length, name bytes, u32 rank, u32 dims, f32
//! payload. Adagrad accumulators use an "acc." name prefix.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hltdnn::model::{ModelState, ParamSet};
use crate::nn_core::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"HLTC";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_TENSORS: usize = 1024;
const MAX_RANK: u32 = 8;
const MAX_ELEMS: usize = 1 << 26;

pub fn encode_checkpoint(entries: &[(String, &Tensor<f32>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, tensor) in entries {
        assert!(name.len() <= u8::MAX as usize, "tensor name too long: {name}");
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.dims().len() as u32).to_le_bytes());
        for &d in tensor.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
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
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Unsupported(format!("checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    if count == 0 || count > MAX_TENSORS {
        return Err(Error::Format(format!("tensor count {count} out of range")));
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u8()? as usize;
        if name_len == 0 {
            return Err(Error::Format("empty tensor name".into()));
        }
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        if entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::Format(format!("duplicate tensor name {name}")));
        }
        let rank = r.u32()?;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("tensor {name}: rank {rank} out of range")));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        let mut elems = 1usize;
        for _ in 0..rank {
            let d = r.u32()? as usize;
            if d == 0 {
                return Err(Error::Format(format!("tensor {name}: zero dimension")));
            }
            elems = elems
                .checked_mul(d)
                .filter(|&e| e <= MAX_ELEMS)
                .ok_or_else(|| Error::Format(format!("tensor {name}: too many elements")))?;
            dims.push(d);
        }
        let payload = r.take(elems * 4)?;
        let mut data = Vec::with_capacity(elems);
        for chunk in payload.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Format(format!("tensor {name}: non-finite value")));
            }
            data.push(v);
        }
        entries.push((name, Tensor::from_vec(&dims, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.pos
        )));
    }
    Ok(entries)
}

/// Serialize a model, optionally with its optimizer accumulators.
pub fn checkpoint_bytes(model: &ModelState<f32>, acc: Option<&ParamSet<f32>>) -> Vec<u8> {
    let mut entries = model.params.named();
    let acc_named: Vec<(String, &Tensor<f32>)> = match acc {
        Some(a) => a.named().into_iter().map(|(n, t)| (format!("acc.{n}"), t)).collect(),
        None => Vec::new(),
    };
    entries.extend(acc_named);
    encode_checkpoint(&entries)
}

pub fn save_checkpoint(
    path: &Path,
    model: &ModelState<f32>,
    acc: Option<&ParamSet<f32>>,
) -> Result<()> {
    fs::write(path, checkpoint_bytes(model, acc))?;
    Ok(())
}

fn fill_from(
    target: &mut ParamSet<f32>,
    entries: &[(String, Tensor<f32>)],
    prefix: &str,
) -> Result<()> {
    for (name, tensor) in target.named_mut() {
        let full = format!("{prefix}{name}");
        let entry = entries
            .iter()
            .find(|(n, _)| *n == full)
            .ok_or_else(|| Error::Format(format!("checkpoint is missing tensor {full}")))?;
        if entry.1.dims() != tensor.dims() {
            return Err(Error::Shape(format!(
                "checkpoint tensor {full} has dims {:?}, model expects {:?}",
                entry.1.dims(),
                tensor.dims()
            )));
        }
        tensor.data_mut().copy_from_slice(entry.1.data());
    }
    Ok(())
}

/// Load weights (and accumulators when requested) into an existing model
/// built from the same configuration. Unknown non-"acc." tensors are
/// rejected; "acc." entries are optional unless `acc` is supplied.
pub fn load_checkpoint(
    path: &Path,
    model: &mut ModelState<f32>,
    acc: Option<&mut ParamSet<f32>>,
) -> Result<()> {
    let entries = decode_checkpoint(&fs::read(path)?)?;
    let expected: Vec<String> = model.params.named().iter().map(|(n, _)| n.clone()).collect();
    for (name, _) in &entries {
        let bare = name.strip_prefix("acc.").unwrap_or(name);
        if !expected.iter().any(|e| e == bare) {
            return Err(Error::Format(format!("unexpected checkpoint tensor {name}")));
        }
    }
    fill_from(&mut model.params, &entries, "")?;
    if let Some(acc) = acc {
        fill_from(acc, &entries, "acc.")?;
    }
    Ok(())
}
