//! Gammatone filterbank and GFCC.
//!
//! 64 fourth-order gammatone filters (Slaney's cascade of four biquads),
//! center frequencies equally spaced on the ERB-rate scale from 50 Hz to
//! 8 kHz, each normalized to unit gain at its center frequency.

use crate::error::Result;
use crate::grid::Grid2;
use crate::signal_io::Segment;
use crate::tf_features::{
    dct_ii, frame_count, hann, to_f32, FeatureKind, FeatureMap, FrameParams, LOG_EPS,
};

/// Glasberg–Moore equivalent rectangular bandwidth at `hz`.
pub fn erb_bandwidth_hz(hz: f64) -> f64 {
    24.7 * (4.37 * hz / 1000.0 + 1.0)
}

fn hz_to_erb_rate(hz: f64) -> f64 {
    21.4 * (1.0 + 4.37 * hz / 1000.0).log10()
}

fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) * 1000.0 / 4.37
}

/// 64 center frequencies equally spaced on the ERB-rate scale in [50, 8000].
pub fn gammatone_center_frequencies(n_channels: usize) -> Vec<f64> {
    let lo = hz_to_erb_rate(50.0);
    let hi = hz_to_erb_rate(8000.0);
    (0..n_channels)
        .map(|i| erb_rate_to_hz(lo + (hi - lo) * i as f64 / (n_channels - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn response_at(&self, omega: f64) -> num_complex::Complex<f64> {
        use num_complex::Complex;
        let z1 = Complex::new(omega.cos(), -omega.sin());
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }
}

/// Slaney's four-biquad gammatone cascade for one center frequency, with the
/// first stage scaled so the cascade has unit gain at `cf`.
fn gammatone_cascade(cf: f64, rate_hz: u32) -> [Biquad; 4] {
    let t = 1.0 / rate_hz as f64;
    let b = 1.019 * 2.0 * std::f64::consts::PI * erb_bandwidth_hz(cf);
    let omega = 2.0 * std::f64::consts::PI * cf * t;
    let (sin, cos) = omega.sin_cos();
    let exp_bt = (b * t).exp();
    let a1 = -2.0 * cos / exp_bt;
    let a2 = (-2.0 * b * t).exp();
    let root_pos = (3.0 + 2f64.powf(1.5)).sqrt();
    let root_neg = (3.0 - 2f64.powf(1.5)).sqrt();
    let b1s = [
        -(2.0 * t * cos / exp_bt + 2.0 * root_pos * t * sin / exp_bt) / 2.0,
        -(2.0 * t * cos / exp_bt - 2.0 * root_pos * t * sin / exp_bt) / 2.0,
        -(2.0 * t * cos / exp_bt + 2.0 * root_neg * t * sin / exp_bt) / 2.0,
        -(2.0 * t * cos / exp_bt - 2.0 * root_neg * t * sin / exp_bt) / 2.0,
    ];
    let mut stages = b1s.map(|b1| Biquad { b0: t, b1, a1, a2 });
    let gain: f64 =
        stages.iter().map(|s| s.response_at(omega).norm()).product();
    stages[0].b0 /= gain;
    stages[0].b1 /= gain;
    stages
}

fn filter_in_place(stages: &[Biquad; 4], x: &[f32], y: &mut [f64]) {
    for (slot, &v) in y.iter_mut().zip(x) {
        *slot = v as f64;
    }
    for s in stages {
        let mut s1 = 0.0f64;
        let mut s2 = 0.0f64;
        for v in y.iter_mut() {
            let x_n = *v;
            let y_n = s.b0 * x_n + s1;
            s1 = s.b1 * x_n - s.a1 * y_n + s2;
            s2 = -s.a2 * y_n;
            *v = y_n;
        }
    }
}

/// Per-frame energy of each gammatone channel: Σ_n (w[n]·y[start+n])² with a
/// Hann frame window. Rows are channels, columns frames. Linear scale.
pub fn gammatone_energies(seg: &Segment, p: &FrameParams) -> Result<Grid2<f64>> {
    let n_channels = FeatureKind::Gfcc.freq_bins();
    let frames = frame_count(seg.samples.len(), p)?;
    let window = hann(p.window_len);
    let mut out = Grid2::zeros(n_channels, frames);
    let mut filtered = vec![0.0f64; seg.samples.len()];
    for (ch, cf) in gammatone_center_frequencies(n_channels).into_iter().enumerate() {
        let stages = gammatone_cascade(cf, seg.sample_rate_hz);
        filter_in_place(&stages, &seg.samples, &mut filtered);
        for t in 0..frames {
            let start = t * p.hop_len;
            let mut acc = 0.0f64;
            for (n, &w) in window.iter().enumerate() {
                let v = w * filtered[start + n];
                acc += v * v;
            }
            out[(ch, t)] = acc;
        }
    }
    Ok(out)
}

/// GFCC: log gammatone energies, then a full 64-point orthonormal DCT-II
/// per frame.
pub fn gfcc(seg: &Segment, p: &FrameParams) -> Result<FeatureMap> {
    let energies = gammatone_energies(seg, p)?;
    let n = energies.rows();
    let mut out = Grid2::zeros(n, energies.cols());
    let mut col = vec![0.0f64; n];
    for t in 0..energies.cols() {
        for ch in 0..n {
            col[ch] = (energies[(ch, t)] + LOG_EPS).ln();
        }
        for (k, &c) in dct_ii(&col, n).iter().enumerate() {
            out[(k, t)] = c;
        }
    }
    FeatureMap::new(FeatureKind::Gfcc, to_f32(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_features::{test_segment, tone_segment};

    #[test]
    fn erb_of_1khz() {
        assert!((erb_bandwidth_hz(1000.0) - 132.639).abs() < 1e-3);
    }

    #[test]
    fn centers_span_band_monotonically() {
        let cf = gammatone_center_frequencies(64);
        assert_eq!(cf.len(), 64);
        assert!((cf[0] - 50.0).abs() < 1e-6);
        assert!((cf[63] - 8000.0).abs() < 1e-6);
        assert!(cf.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unit_gain_at_center() {
        for cf in [50.0, 440.0, 1000.0, 4000.0] {
            let stages = gammatone_cascade(cf, 16_000);
            let omega = 2.0 * std::f64::consts::PI * cf / 16_000.0;
            let gain: f64 = stages.iter().map(|s| s.response_at(omega).norm()).product();
            assert!((gain - 1.0).abs() < 1e-12, "cf {cf}: gain {gain}");
        }
    }

    #[test]
    fn tone_energy_peaks_in_nearest_channel() {
        let cf = gammatone_center_frequencies(64);
        let nearest = (0..64)
            .min_by(|&a, &b| (cf[a] - 1000.0).abs().total_cmp(&(cf[b] - 1000.0).abs()))
            .unwrap();
        let energies =
            gammatone_energies(&tone_segment(1000.0, 0.8, 48_000), &FrameParams::default())
                .unwrap();
        // Skip the first frame, where the filters are still settling.
        for t in 1..energies.cols() {
            let argmax = (0..64)
                .max_by(|&a, &b| energies[(a, t)].total_cmp(&energies[(b, t)]))
                .unwrap();
            assert_eq!(argmax, nearest, "frame {t}");
        }
    }

    #[test]
    fn zero_segment_collapses_to_dc_coefficient() {
        let g = gfcc(&test_segment(vec![0.0; 48_000]), &FrameParams::default()).unwrap();
        assert_eq!((g.freq_bins(), g.time_frames()), (64, 43));
        let expected_c0 = (8.0 * LOG_EPS.ln()) as f32;
        for t in 0..43 {
            assert!((g.values[(0, t)] - expected_c0).abs() < 1e-3);
            for k in 1..64 {
                assert!(g.values[(k, t)].abs() < 1e-6, "coefficient {k}");
            }
        }
    }
}
