//! Short-time Fourier transform and the STFT log-magnitude feature.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::signal_io::Segment;
use crate::tf_features::{to_f32, FeatureKind, FeatureMap, FrameParams, LOG_EPS};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// Periodic Hann window: w[n] = 0.5·(1 − cos(2πn/len)).
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Number of full analysis frames in a buffer of `seg_len` samples:
/// floor((seg_len − window)/hop) + 1, no padding.
pub fn frame_count(seg_len: usize, p: &FrameParams) -> Result<usize> {
    if seg_len < p.window_len {
        return Err(Error::TooShort { len: seg_len, window: p.window_len });
    }
    Ok((seg_len - p.window_len) / p.hop_len + 1)
}

/// One-sided windowed DFT per frame: grid of `window/2 + 1` bins × frames.
pub fn stft_complex(seg: &Segment, p: &FrameParams) -> Result<Grid2<Complex<f64>>> {
    let frames = frame_count(seg.samples.len(), p)?;
    let n_fft = p.window_len;
    let bins = n_fft / 2 + 1;
    let window = hann(n_fft);
    let fft = plan_fft(n_fft);

    let mut out = Grid2::zeros(bins, frames);
    let mut buf = vec![Complex::default(); n_fft];
    for t in 0..frames {
        let start = t * p.hop_len;
        for (n, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(window[n] * seg.samples[start + n] as f64, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            out[(k, t)] = buf[k];
        }
    }
    Ok(out)
}

/// STFT feature: 20·log10(|X[k]| + ε) over the lowest 48 one-sided bins.
pub fn stft_feature(seg: &Segment, p: &FrameParams) -> Result<FeatureMap> {
    let spec = stft_complex(seg, p)?;
    let bins = FeatureKind::Stft.freq_bins();
    if spec.rows() < bins {
        return Err(Error::Shape(format!(
            "window of {} samples yields {} bins, need {bins}",
            p.window_len,
            spec.rows()
        )));
    }
    let mut out = Grid2::zeros(bins, spec.cols());
    for k in 0..bins {
        for t in 0..spec.cols() {
            out[(k, t)] = 20.0 * (spec[(k, t)].norm() + LOG_EPS).log10();
        }
    }
    FeatureMap::new(FeatureKind::Stft, to_f32(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_features::{test_segment, tone_segment};

    /// Independent naive DFT of one windowed frame.
    fn naive_frame_dft(frame: &[f32], window: &[f64], k: usize) -> Complex<f64> {
        let n_fft = frame.len();
        let mut acc = Complex::new(0.0, 0.0);
        for n in 0..n_fft {
            let angle = -2.0 * std::f64::consts::PI * (k * n) as f64 / n_fft as f64;
            acc += window[n] * frame[n] as f64 * Complex::new(angle.cos(), angle.sin());
        }
        acc
    }

    #[test]
    fn frame_count_examples() {
        let p = FrameParams::default();
        assert_eq!(frame_count(48_000, &p).unwrap(), 43);
        assert_eq!(frame_count(4_000, &p).unwrap(), 1);
        assert!(matches!(
            frame_count(3_999, &p),
            Err(Error::TooShort { len: 3_999, window: 4_000 })
        ));
    }

    #[test]
    fn zero_segment_gives_zero_spectrum() {
        let spec = stft_complex(&test_segment(vec![0.0; 48_000]), &FrameParams::default()).unwrap();
        assert!(spec.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn tone_peaks_at_analytic_bin() {
        // 1 kHz at 16 kHz with a 4000-point window lands on bin 250 exactly.
        let seg = tone_segment(1000.0, 1.0, 48_000);
        let spec = stft_complex(&seg, &FrameParams::default()).unwrap();
        for t in 0..spec.cols() {
            let argmax = (0..spec.rows())
                .max_by(|&a, &b| spec[(a, t)].norm().total_cmp(&spec[(b, t)].norm()))
                .unwrap();
            assert_eq!(argmax, 250, "frame {t}");
        }
    }

    #[test]
    fn matches_naive_dft() {
        let seg = tone_segment(317.0, 0.8, 4_000);
        let p = FrameParams::default();
        let spec = stft_complex(&seg, &p).unwrap();
        let window = hann(4_000);
        for k in [0usize, 1, 79, 250, 2000] {
            let want = naive_frame_dft(&seg.samples, &window, k);
            let got = spec[(k, 0)];
            assert!(
                (got - want).norm() <= 1e-6 * want.norm().max(1.0),
                "bin {k}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn per_frame_parseval() {
        let seg = tone_segment(440.0, 0.7, 48_000);
        let p = FrameParams::default();
        let spec = stft_complex(&seg, &p).unwrap();
        let window = hann(p.window_len);
        let n_fft = p.window_len as f64;
        for t in [0usize, 21, 42] {
            let start = t * p.hop_len;
            let time_energy: f64 = (0..p.window_len)
                .map(|n| {
                    let v = window[n] * seg.samples[start + n] as f64;
                    v * v
                })
                .sum();
            let half = p.window_len / 2;
            let mut freq_energy = spec[(0, t)].norm_sqr() + spec[(half, t)].norm_sqr();
            for k in 1..half {
                freq_energy += 2.0 * spec[(k, t)].norm_sqr();
            }
            freq_energy /= n_fft;
            let rel = (time_energy - freq_energy).abs() / time_energy;
            assert!(rel < 1e-6, "frame {t}: relative error {rel}");
        }
    }

    #[test]
    fn feature_floor_shape_and_scaling() {
        let p = FrameParams::default();
        let zero = stft_feature(&test_segment(vec![0.0; 48_000]), &p).unwrap();
        assert_eq!((zero.freq_bins(), zero.time_frames()), (48, 43));
        assert!(zero.values.data().iter().all(|&v| (v - -200.0).abs() < 1e-4));

        let quiet = tone_segment(100.0, 0.05, 48_000);
        let mut loud = quiet.clone();
        for s in &mut loud.samples {
            *s *= 10.0;
        }
        let fq = stft_feature(&quiet, &p).unwrap();
        let fl = stft_feature(&loud, &p).unwrap();
        for (a, b) in fq.values.data().iter().zip(fl.values.data()) {
            if *a > -60.0 {
                assert!((b - a - 20.0).abs() < 1e-3, "scaling: {a} -> {b}");
            }
        }
    }

    #[test]
    fn too_short_segment_rejected() {
        let p = FrameParams::default();
        assert!(matches!(
            stft_feature(&test_segment(vec![0.1; 3_000]), &p),
            Err(Error::TooShort { .. })
        ));
    }
}
