//! Constant-Q and variable-Q transforms.
//!
//! 64 geometrically spaced bins, 8 per octave from 31.25 Hz, computed as
//! direct time-domain inner products with Hann-windowed complex exponentials
//! centered on hop-aligned frame centers (floor(len/hop) + 1 frames, edges
//! zero-padded). The VQT widens low-frequency bandwidths by a constant
//! γ_v = 24.7·α/0.108 Hz, trading frequency resolution for shorter kernels.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::signal_io::Segment;
use crate::tf_features::{hann, to_f32, FeatureKind, FeatureMap, LOG_EPS};

const N_BINS: usize = 64;
const BINS_PER_OCTAVE: f64 = 8.0;
const F_MIN_HZ: f64 = 31.25;

/// Geometric bin centers f_k = 31.25·2^(k/8), shared by CQT and VQT.
pub fn cqt_center_frequencies() -> Vec<f64> {
    (0..N_BINS).map(|k| F_MIN_HZ * 2f64.powf(k as f64 / BINS_PER_OCTAVE)).collect()
}

/// Constant quality factor Q = 1/(2^(1/8) − 1).
pub fn cqt_quality_factor() -> f64 {
    1.0 / (2f64.powf(1.0 / BINS_PER_OCTAVE) - 1.0)
}

/// VQT bandwidths Δ_k = α·f_k + γ_v with α = 2^(1/8) − 1.
pub fn vqt_bandwidths() -> Vec<f64> {
    let alpha = 2f64.powf(1.0 / BINS_PER_OCTAVE) - 1.0;
    let gamma = 24.7 * alpha / 0.108;
    cqt_center_frequencies().into_iter().map(|f| alpha * f + gamma).collect()
}

struct Kernel {
    coeffs: Vec<Complex<f64>>,
}

/// Hann-windowed complex exponential of length `len` at `freq`, normalized by
/// the window sum so a unit tone at `freq` responds with magnitude ~0.5.
fn build_kernel(freq: f64, len: usize, rate_hz: u32) -> Kernel {
    let window = hann(len);
    let w_sum: f64 = window.iter().sum();
    let center = (len as f64 - 1.0) / 2.0;
    let coeffs = window
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            let angle =
                -2.0 * std::f64::consts::PI * freq * (j as f64 - center) / rate_hz as f64;
            (w / w_sum) * Complex::new(angle.cos(), angle.sin())
        })
        .collect();
    Kernel { coeffs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Variant {
    Cqt,
    Vqt,
}

fn kernel_lengths(variant: Variant, rate_hz: u32) -> Vec<usize> {
    match variant {
        Variant::Cqt => {
            let q = cqt_quality_factor();
            cqt_center_frequencies()
                .into_iter()
                .map(|f| (q * rate_hz as f64 / f).ceil() as usize)
                .collect()
        }
        Variant::Vqt => vqt_bandwidths()
            .into_iter()
            .map(|bw| (rate_hz as f64 / bw).ceil() as usize)
            .collect(),
    }
}

fn shared_kernels(variant: Variant, rate_hz: u32) -> Arc<Vec<Kernel>> {
    static CACHE: OnceLock<Mutex<BTreeMap<(Variant, u32), Arc<Vec<Kernel>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry((variant, rate_hz))
        .or_insert_with(|| {
            let freqs = cqt_center_frequencies();
            let kernels = kernel_lengths(variant, rate_hz)
                .into_iter()
                .zip(freqs)
                .map(|(len, f)| build_kernel(f, len, rate_hz))
                .collect();
            Arc::new(kernels)
        })
        .clone()
}

fn transform(seg: &Segment, hop_len: usize, variant: Variant, kind: FeatureKind) -> Result<FeatureMap> {
    if hop_len == 0 {
        return Err(Error::Range("hop length must be positive".into()));
    }
    if seg.samples.is_empty() {
        return Err(Error::TooShort { len: 0, window: 1 });
    }
    let nyquist = seg.sample_rate_hz as f64 / 2.0;
    let top = *cqt_center_frequencies().last().unwrap();
    if top > nyquist {
        return Err(Error::Range(format!(
            "top bin {top:.1} Hz exceeds Nyquist {nyquist:.1} Hz"
        )));
    }

    let kernels = shared_kernels(variant, seg.sample_rate_hz);
    let n = seg.samples.len() as isize;
    let frames = seg.samples.len() / hop_len + 1;
    let mut out = Grid2::zeros(N_BINS, frames);
    for (k, kernel) in kernels.iter().enumerate() {
        let len = kernel.coeffs.len() as isize;
        for t in 0..frames {
            let center = (t * hop_len) as isize;
            let start = center - len / 2;
            let j_lo = (-start).max(0) as usize;
            let j_hi = (n - start).clamp(0, len) as usize;
            let mut acc = Complex::new(0.0, 0.0);
            for j in j_lo..j_hi {
                acc += seg.samples[(start + j as isize) as usize] as f64 * kernel.coeffs[j];
            }
            out[(k, t)] = 20.0 * (acc.norm() + LOG_EPS).log10();
        }
    }
    FeatureMap::new(kind, to_f32(&out))
}

/// Constant-Q transform feature: 64 x (floor(len/hop) + 1) log-magnitudes.
pub fn cqt(seg: &Segment, hop_len: usize) -> Result<FeatureMap> {
    transform(seg, hop_len, Variant::Cqt, FeatureKind::Cqt)
}

/// Variable-Q transform feature, same geometry as [`cqt`].
pub fn vqt(seg: &Segment, hop_len: usize) -> Result<FeatureMap> {
    transform(seg, hop_len, Variant::Vqt, FeatureKind::Vqt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_features::{test_segment, tone_segment};

    #[test]
    fn quality_factor_and_band_edges() {
        assert!((cqt_quality_factor() - 11.048).abs() < 1e-3);
        let freqs = cqt_center_frequencies();
        assert_eq!(freqs.len(), 64);
        assert!((freqs[0] - 31.25).abs() < 1e-12);
        assert!((freqs[32] - 500.0).abs() < 1e-9);
        // Top bin stays below the 8 kHz Nyquist of the standard rate.
        assert!(freqs[63] > 7300.0 && freqs[63] < 7400.0, "f_63 = {}", freqs[63]);
    }

    #[test]
    fn vqt_bandwidth_values() {
        let alpha = 2f64.powf(0.125) - 1.0;
        let gamma = 24.7 * alpha / 0.108;
        assert!((gamma - 20.70).abs() < 0.01);
        let q_k: Vec<f64> = cqt_center_frequencies()
            .iter()
            .zip(vqt_bandwidths())
            .map(|(f, bw)| f / bw)
            .collect();
        assert!((q_k[0] - 1.33).abs() < 0.01);
        // Q_k grows toward the constant Q as frequency rises.
        assert!(q_k.windows(2).all(|w| w[0] < w[1]));
        assert!(q_k[63] / cqt_quality_factor() > 0.95);
    }

    #[test]
    fn vqt_kernels_shorter_at_low_frequency() {
        let cqt_len = kernel_lengths(Variant::Cqt, 16_000);
        let vqt_len = kernel_lengths(Variant::Vqt, 16_000);
        assert!(vqt_len[0] < cqt_len[0] / 8, "{} vs {}", vqt_len[0], cqt_len[0]);
    }

    #[test]
    fn zero_segment_hits_floor_with_47_frames() {
        for f in [cqt, vqt] {
            let map = f(&test_segment(vec![0.0; 48_000]), 1024).unwrap();
            assert_eq!((map.freq_bins(), map.time_frames()), (64, 47));
            assert!(map.values.data().iter().all(|&v| (v - -200.0).abs() < 1e-4));
        }
    }

    #[test]
    fn tone_at_bin_32_center() {
        let seg = tone_segment(500.0, 0.9, 48_000);
        for f in [cqt, vqt] {
            let map = f(&seg, 1024).unwrap();
            // Interior frames: far enough from the edges that even the longest
            // kernel (5657 samples for CQT bin 0) fits entirely.
            for t in 3..=43 {
                let argmax = (0..64)
                    .max_by(|&a, &b| map.values[(a, t)].total_cmp(&map.values[(b, t)]))
                    .unwrap();
                assert_eq!(argmax, 32, "frame {t}");
            }
        }
    }

    #[test]
    fn rejects_rate_below_band() {
        let mut seg = tone_segment(100.0, 0.5, 24_000);
        seg.sample_rate_hz = 8_000;
        assert!(matches!(cqt(&seg, 1024), Err(Error::Range(_))));
        assert!(matches!(vqt(&seg, 1024), Err(Error::Range(_))));
    }
}
