//! Feature combinations: enumeration, adaptive padding, channel stacking,
//! and per-kind z-scoring.
//!
//! A combination is a nonempty subset of the six feature kinds, identified by
//! a bitmask over [`FeatureKind::ALL`] positions. Selected maps are padded to
//! the largest height/width in the selection (zeros added symmetrically, odd
//! deficits spilling to the bottom/right) and concatenated in canonical kind
//! order.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::tf_features::{FeatureKind, FeatureMap};

/// Bitmask over feature kinds; bit `i` selects `FeatureKind::ALL[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CombinationId {
    bitmask: u32,
}

impl CombinationId {
    pub fn new(bitmask: u32) -> Result<CombinationId> {
        if bitmask == 0 {
            return Err(Error::Selection("combination bitmask must be nonzero".into()));
        }
        if bitmask >= 1 << 16 {
            return Err(Error::Selection(format!("combination bitmask {bitmask} out of range")));
        }
        Ok(CombinationId { bitmask })
    }

    pub fn from_kinds(kinds: &[FeatureKind]) -> Result<CombinationId> {
        let mut bitmask = 0u32;
        for k in kinds {
            let bit = 1 << k.index();
            if bitmask & bit != 0 {
                return Err(Error::Selection(format!("duplicate feature kind {}", k.name())));
            }
            bitmask |= bit;
        }
        CombinationId::new(bitmask)
    }

    /// Parse a `+`-separated kind list; any order is accepted and collapses
    /// to the same id.
    pub fn parse(name: &str) -> Result<CombinationId> {
        let kinds: Vec<FeatureKind> = name
            .split('+')
            .map(|part| {
                FeatureKind::from_name(part.trim())
                    .ok_or_else(|| Error::Selection(format!("unknown feature kind {part:?}")))
            })
            .collect::<Result<_>>()?;
        CombinationId::from_kinds(&kinds)
    }

    pub fn bitmask(self) -> u32 {
        self.bitmask
    }

    /// Selected kinds in canonical order (MS, MFCC, STFT, GFCC, CQT, VQT).
    pub fn kinds(self) -> Vec<FeatureKind> {
        FeatureKind::ALL
            .into_iter()
            .filter(|k| self.bitmask & (1 << k.index()) != 0)
            .collect()
    }

    pub fn contains(self, kind: FeatureKind) -> bool {
        self.bitmask & (1 << kind.index()) != 0
    }

    pub fn n_channels(self) -> usize {
        self.bitmask.count_ones() as usize
    }

    /// Canonical display name, e.g. `MFCC+STFT+GFCC+VQT`.
    pub fn name(self) -> String {
        let names: Vec<&str> = self.kinds().iter().map(|k| k.name()).collect();
        names.join("+")
    }
}

/// Every nonempty subset of `m` kinds, as ascending bitmasks 1..2^m − 1.
pub fn enumerate_combinations(m: u32) -> Result<Vec<CombinationId>> {
    if !(1..=16).contains(&m) {
        return Err(Error::Range(format!("combination arity {m} outside [1, 16]")));
    }
    (1..(1u32 << m)).map(CombinationId::new).collect()
}

/// Zero-pad a grid to `target_h x target_w`, centering the source; an odd
/// row deficit adds the extra row at the bottom, an odd column deficit the
/// extra column at the right.
pub fn adaptive_pad(src: &Grid2<f32>, target_h: usize, target_w: usize) -> Result<Grid2<f32>> {
    let (h, w) = (src.rows(), src.cols());
    if target_h < h || target_w < w {
        return Err(Error::Size(format!(
            "cannot pad {h}x{w} down to {target_h}x{target_w}"
        )));
    }
    let top = (target_h - h) / 2;
    let left = (target_w - w) / 2;
    let mut out = Grid2::zeros(target_h, target_w);
    for r in 0..h {
        out.row_mut(top + r)[left..left + w].copy_from_slice(src.row(r));
    }
    Ok(out)
}

/// Inverse of [`adaptive_pad`]: recover the centered `src_h x src_w` region.
pub fn crop_padding(padded: &Grid2<f32>, src_h: usize, src_w: usize) -> Result<Grid2<f32>> {
    let (h, w) = (padded.rows(), padded.cols());
    if src_h > h || src_w > w {
        return Err(Error::Size(format!("cannot crop {h}x{w} up to {src_h}x{src_w}")));
    }
    let top = (h - src_h) / 2;
    let left = (w - src_w) / 2;
    let mut out = Grid2::zeros(src_h, src_w);
    for r in 0..src_h {
        out.row_mut(r).copy_from_slice(&padded.row(top + r)[left..left + src_w]);
    }
    Ok(out)
}

/// Channel-stacked input for the network: `n_channels x height x width`,
/// flat row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub combo: CombinationId,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureStack {
    pub fn n_channels(&self) -> usize {
        self.combo.n_channels()
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Pad and concatenate the maps selected by `combo` in canonical kind order.
/// `features` must contain exactly the selected kinds, one map each, in any
/// order.
pub fn stack(features: &[FeatureMap], combo: CombinationId) -> Result<FeatureStack> {
    let kinds = combo.kinds();
    let mut picked: Vec<Option<&FeatureMap>> = vec![None; kinds.len()];
    for fm in features {
        match kinds.iter().position(|&k| k == fm.kind) {
            Some(slot) => {
                if picked[slot].is_some() {
                    return Err(Error::Selection(format!(
                        "duplicate feature map for kind {}",
                        fm.kind.name()
                    )));
                }
                picked[slot] = Some(fm);
            }
            None => {
                return Err(Error::Selection(format!(
                    "feature kind {} is not part of combination {}",
                    fm.kind.name(),
                    combo.name()
                )))
            }
        }
    }
    let mut maps = Vec::with_capacity(kinds.len());
    for (slot, fm) in picked.into_iter().enumerate() {
        maps.push(fm.ok_or_else(|| {
            Error::Selection(format!(
                "combination {} is missing kind {}",
                combo.name(),
                kinds[slot].name()
            ))
        })?);
    }

    let height = maps.iter().map(|m| m.freq_bins()).max().unwrap();
    let width = maps.iter().map(|m| m.time_frames()).max().unwrap();
    let mut data = Vec::with_capacity(kinds.len() * height * width);
    for fm in maps {
        let padded = adaptive_pad(&fm.values, height, width)?;
        data.extend_from_slice(padded.data());
    }
    Ok(FeatureStack { combo, height, width, data })
}

/// Training-split normalization statistics for one feature kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

/// Streaming mean/variance accumulator over feature-map values.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatsAccumulator {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl StatsAccumulator {
    pub fn add_map(&mut self, map: &FeatureMap) {
        for &v in map.values.data() {
            self.n += 1;
            self.sum += v as f64;
            self.sum_sq += v as f64 * v as f64;
        }
    }

    /// Population mean and standard deviation. A constant feature gets
    /// std = 1 so that z-scoring maps it to exact zeros.
    pub fn finalize(&self) -> Result<FeatureStats> {
        if self.n == 0 {
            return Err(Error::EmptyInput("no feature values accumulated"));
        }
        let mean = self.sum / self.n as f64;
        let var = (self.sum_sq / self.n as f64 - mean * mean).max(0.0);
        let std = var.sqrt();
        Ok(FeatureStats { mean, std: if std < 1e-8 { 1.0 } else { std } })
    }
}

/// Z-score a map with its kind's training statistics.
pub fn normalize(map: &FeatureMap, stats: &FeatureStats) -> FeatureMap {
    let data: Vec<f32> = map
        .values
        .data()
        .iter()
        .map(|&v| ((v as f64 - stats.mean) / stats.std) as f32)
        .collect();
    FeatureMap {
        kind: map.kind,
        values: Grid2::from_vec(map.values.rows(), map.values.cols(), data),
    }
}
