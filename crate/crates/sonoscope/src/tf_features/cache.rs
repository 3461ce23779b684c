//! TFFM feature cache files.
//!
//! Layout (little-endian): magic `TFFM`, u32 version = 1, u8 kind, u32
//! freq_bins, u32 time_frames, then freq_bins×time_frames f32 values in
//! row-major (frequency-major) order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::tf_features::{FeatureKind, FeatureMap};

const MAGIC: &[u8; 4] = b"TFFM";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 4 + 4;
/// Upper bound on stored elements; well above any real map, keeps a corrupt
/// header from requesting a huge allocation.
const MAX_ELEMS: u64 = 1 << 24;

pub fn encode_feature_map(map: &FeatureMap) -> Vec<u8> {
    let (rows, cols) = (map.freq_bins(), map.time_frames());
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(map.kind.index() as u8);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in map.values.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("cache file too short: {} bytes", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad cache magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let kind = FeatureKind::from_index(bytes[8] as usize)
        .ok_or_else(|| Error::Format(format!("unknown feature kind byte {}", bytes[8])))?;
    let rows = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as u64;
    let cols = u32::from_le_bytes(bytes[13..17].try_into().unwrap()) as u64;
    if rows != kind.freq_bins() as u64 {
        return Err(Error::Format(format!(
            "kind {} expects {} bins, header says {rows}",
            kind.name(),
            kind.freq_bins()
        )));
    }
    if cols == 0 || rows * cols > MAX_ELEMS {
        return Err(Error::Format(format!("implausible dimensions {rows}x{cols}")));
    }
    let elems = (rows * cols) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != elems * 4 {
        return Err(Error::Format(format!(
            "payload is {} bytes, dimensions need {}",
            body.len(),
            elems * 4
        )));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMap::new(kind, Grid2::from_vec(rows as usize, cols as usize, data))
}

pub fn write_feature_map<P: AsRef<Path>>(path: P, map: &FeatureMap) -> Result<()> {
    std::fs::write(path, encode_feature_map(map))?;
    Ok(())
}

pub fn read_feature_map<P: AsRef<Path>>(path: P) -> Result<FeatureMap> {
    decode_feature_map(&std::fs::read(path)?)
}
