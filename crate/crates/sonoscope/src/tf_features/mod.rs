//! The six time-frequency feature extractors.
//!
//! Every extractor maps a fixed-length [`Segment`] to a [`FeatureMap`], a 2-D
//! grid of `freq_bins x time_frames` values. STFT-family features (MS, MFCC,
//! STFT, GFCC) share the analysis frame grid of [`FrameParams`]; CQT and VQT
//! use their own hop-aligned frame centers. Internals run in f64 and the
//! result is stored as f32.

mod cache;
mod cqt;
mod dct;
mod gammatone;
mod mel;
mod stft;

pub use cache::{decode_feature_map, encode_feature_map, read_feature_map, write_feature_map};
pub use cqt::{cqt, cqt_center_frequencies, vqt, vqt_bandwidths};
pub use dct::dct_ii;
pub use gammatone::{erb_bandwidth_hz, gammatone_center_frequencies, gammatone_energies, gfcc};
pub use mel::{hz_to_mel, mel_filter_center_frequencies, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc};
pub use stft::{frame_count, hann, stft_complex, stft_feature};

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::signal_io::Segment;

/// Log floor added before every log compression.
pub const LOG_EPS: f64 = 1e-10;

/// The six feature kinds, in canonical order. The order fixes combination
/// bitmask positions, cache `kind` bytes, and combo display names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    Ms,
    Mfcc,
    Stft,
    Gfcc,
    Cqt,
    Vqt,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Ms,
        FeatureKind::Mfcc,
        FeatureKind::Stft,
        FeatureKind::Gfcc,
        FeatureKind::Cqt,
        FeatureKind::Vqt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Ms => "MS",
            FeatureKind::Mfcc => "MFCC",
            FeatureKind::Stft => "STFT",
            FeatureKind::Gfcc => "GFCC",
            FeatureKind::Cqt => "CQT",
            FeatureKind::Vqt => "VQT",
        }
    }

    pub fn from_name(name: &str) -> Option<FeatureKind> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    /// Position in [`Self::ALL`]; doubles as the cache-file kind byte and the
    /// combination bitmask bit.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<FeatureKind> {
        Self::ALL.get(index).copied()
    }

    /// Frequency-bin count this kind always produces.
    pub fn freq_bins(self) -> usize {
        match self {
            FeatureKind::Ms => 44,
            FeatureKind::Mfcc => 16,
            FeatureKind::Stft => 48,
            FeatureKind::Gfcc => 64,
            FeatureKind::Cqt => 64,
            FeatureKind::Vqt => 64,
        }
    }
}

/// Analysis frame geometry for the STFT-family extractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameParams {
    pub window_len: usize,
    pub hop_len: usize,
}

impl FrameParams {
    /// 250 ms window / 64 ms hop at the given rate.
    pub fn at_rate(rate_hz: u32) -> FrameParams {
        FrameParams { window_len: rate_hz as usize / 4, hop_len: rate_hz as usize * 64 / 1000 }
    }

    pub fn new(window_len: usize, hop_len: usize) -> Result<FrameParams> {
        if hop_len == 0 || hop_len > window_len {
            return Err(Error::Range(format!(
                "frame params need 0 < hop <= window, got hop {hop_len}, window {window_len}"
            )));
        }
        Ok(FrameParams { window_len, hop_len })
    }
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams::at_rate(16_000)
    }
}

/// One extracted feature: `freq_bins x time_frames` finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub kind: FeatureKind,
    pub values: Grid2<f32>,
}

impl FeatureMap {
    pub fn new(kind: FeatureKind, values: Grid2<f32>) -> Result<FeatureMap> {
        if values.rows() != kind.freq_bins() {
            return Err(Error::Shape(format!(
                "{} expects {} frequency bins, got {}",
                kind.name(),
                kind.freq_bins(),
                values.rows()
            )));
        }
        if values.cols() == 0 {
            return Err(Error::Shape(format!("{} feature map has no frames", kind.name())));
        }
        if values.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Range(format!("{} feature map has non-finite values", kind.name())));
        }
        Ok(FeatureMap { kind, values })
    }

    pub fn freq_bins(&self) -> usize {
        self.values.rows()
    }

    pub fn time_frames(&self) -> usize {
        self.values.cols()
    }
}

/// Run one extractor. CQT/VQT take only the hop from `params`.
pub fn extract(kind: FeatureKind, seg: &Segment, params: &FrameParams) -> Result<FeatureMap> {
    match kind {
        FeatureKind::Ms => mel_spectrogram(seg, params),
        FeatureKind::Mfcc => mfcc(seg, params),
        FeatureKind::Stft => stft_feature(seg, params),
        FeatureKind::Gfcc => gfcc(seg, params),
        FeatureKind::Cqt => cqt(seg, params.hop_len),
        FeatureKind::Vqt => vqt(seg, params.hop_len),
    }
}

/// Convert an f64 working grid to the f32 storage grid.
pub(crate) fn to_f32(grid: &Grid2<f64>) -> Grid2<f32> {
    Grid2::from_vec(grid.rows(), grid.cols(), grid.data().iter().map(|&v| v as f32).collect())
}

#[cfg(test)]
pub(crate) fn test_segment(samples: Vec<f32>) -> Segment {
    Segment {
        samples,
        sample_rate_hz: 16_000,
        recording_id: "test".into(),
        class_label: 0,
        segment_index: 0,
    }
}

#[cfg(test)]
pub(crate) fn tone_segment(freq_hz: f64, amp: f32, len: usize) -> Segment {
    let samples = (0..len)
        .map(|n| amp * (2.0 * std::f64::consts::PI * freq_hz * n as f64 / 16_000.0).sin() as f32)
        .collect();
    test_segment(samples)
}
