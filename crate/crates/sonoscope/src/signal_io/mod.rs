//! Audio ingestion: WAV decoding, resampling, segmentation, dataset splits.

pub mod manifest;
mod resample;
mod wav;

pub use manifest::{
    parse_manifest, parse_split_csv, read_manifest, split_to_csv, write_manifest, ManifestEntry,
};
pub use resample::resample;
pub use wav::{parse_wav, read_wav, write_wav};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A mono recording. Amplitudes are finite and within [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
    pub recording_id: String,
    pub class_label: usize,
}

/// A fixed-length clip cut from one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
    pub recording_id: String,
    pub class_label: usize,
    pub segment_index: usize,
}

/// Cut `buf` into consecutive non-overlapping clips of `seconds` each.
///
/// The trailing remainder is discarded; a recording shorter than one clip
/// yields an empty list. `sample_rate_hz × seconds` must be integral.
pub fn segment(buf: &AudioBuffer, seconds: f64) -> Vec<Segment> {
    let seg_len = (buf.sample_rate_hz as f64 * seconds).round() as usize;
    if seg_len == 0 {
        return Vec::new();
    }
    buf.samples
        .chunks_exact(seg_len)
        .enumerate()
        .map(|(segment_index, chunk)| Segment {
            samples: chunk.to_vec(),
            sample_rate_hz: buf.sample_rate_hz,
            recording_id: buf.recording_id.clone(),
            class_label: buf.class_label,
            segment_index,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }

    pub fn from_str(s: &str) -> Option<Partition> {
        match s {
            "train" => Some(Partition::Train),
            "val" => Some(Partition::Val),
            "test" => Some(Partition::Test),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// What `split_dataset` needs to know about one recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingSummary {
    pub recording_id: String,
    pub class_label: usize,
    pub segment_count: usize,
}

/// Recording-level partition assignment. All segments of a recording land in
/// the same partition, so the split can never leak a recording across sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub assignments: BTreeMap<String, Partition>,
    pub seed: u64,
    pub achieved_ratios: [f64; 3],
}

impl SplitManifest {
    pub fn partition_of(&self, recording_id: &str) -> Option<Partition> {
        self.assignments.get(recording_id).copied()
    }
}

/// Assign recordings to train/val/test at the recording level.
///
/// Per class: recordings are sorted by id, shuffled with a seed derived from
/// (`seed`, class), then each is assigned to the partition whose segment-count
/// deficit (target minus segments assigned so far) is largest, ties going to
/// the earlier of train, val, test. Targets accrue class by class and deficits
/// carry across classes, so imbalance left by one class is corrected while
/// assigning the next; a partition can never exceed its target by more than
/// one recording's worth of segments.
pub fn split_dataset(
    recordings: &[RecordingSummary],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitManifest> {
    if recordings.is_empty() {
        return Err(Error::EmptyInput("split_dataset: no recordings"));
    }
    if ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::Range(format!("split ratios must be positive, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Range(format!("split ratios must sum to 1, got {sum}")));
    }

    let mut by_class: BTreeMap<usize, Vec<&RecordingSummary>> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for rec in recordings {
        if !seen.insert(rec.recording_id.as_str()) {
            return Err(Error::Format(format!("duplicate recording id {:?}", rec.recording_id)));
        }
        by_class.entry(rec.class_label).or_default().push(rec);
    }
    for (&class, recs) in &by_class {
        if recs.len() < 3 {
            return Err(Error::InsufficientData { class, count: recs.len(), min: 3 });
        }
    }

    let mut assignments = BTreeMap::new();
    let mut targets = [0.0f64; 3];
    let mut assigned = [0usize; 3];
    for (&class, recs) in by_class.iter_mut() {
        recs.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seeding::stream_seed(seed, class as u64));
        recs.shuffle(&mut rng);

        let class_total: usize = recs.iter().map(|r| r.segment_count).sum();
        for p in 0..3 {
            targets[p] += ratios[p] * class_total as f64;
        }
        for rec in recs.iter() {
            let mut best = 0;
            for p in 1..3 {
                if targets[p] - assigned[p] as f64 > targets[best] - assigned[best] as f64 {
                    best = p;
                }
            }
            assigned[best] += rec.segment_count;
            assignments.insert(rec.recording_id.clone(), Partition::ALL[best]);
        }
    }

    let total: usize = assigned.iter().sum();
    let achieved_ratios = assigned.map(|t| t as f64 / total as f64);
    Ok(SplitManifest { assignments, seed, achieved_ratios })
}
