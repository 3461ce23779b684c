//! Mel filterbank, mel spectrogram (MS), and MFCC.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::signal_io::Segment;
use crate::tf_features::{
    dct_ii, stft_complex, to_f32, FeatureKind, FeatureMap, FrameParams, LOG_EPS,
};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Corner bins (lower, center, upper) of each triangular filter, snapped to
/// the FFT bin grid so every filter peaks at exactly 1 on a real bin.
fn corner_bins(
    n_mels: usize,
    n_fft: usize,
    rate_hz: u32,
    f_min: f64,
    f_max: f64,
) -> Result<Vec<[usize; 3]>> {
    if !(0.0 <= f_min && f_min < f_max && f_max <= rate_hz as f64 / 2.0) {
        return Err(Error::Range(format!(
            "mel band [{f_min}, {f_max}] invalid for rate {rate_hz}"
        )));
    }
    let lo = hz_to_mel(f_min);
    let hi = hz_to_mel(f_max);
    let hz_per_bin = rate_hz as f64 / n_fft as f64;
    let bins: Vec<usize> = (0..n_mels + 2)
        .map(|i| {
            let mel = lo + (hi - lo) * i as f64 / (n_mels + 1) as f64;
            (mel_to_hz(mel) / hz_per_bin).round() as usize
        })
        .collect();
    let corners: Vec<[usize; 3]> = bins.windows(3).map(|w| [w[0], w[1], w[2]]).collect();
    for (m, c) in corners.iter().enumerate() {
        if !(c[0] < c[1] && c[1] < c[2]) {
            return Err(Error::Range(format!(
                "mel filter {m} degenerates at FFT resolution: corners {c:?}"
            )));
        }
    }
    Ok(corners)
}

/// Snapped center frequency (Hz) of each filter.
pub fn mel_filter_center_frequencies(
    n_mels: usize,
    n_fft: usize,
    rate_hz: u32,
    f_min: f64,
    f_max: f64,
) -> Result<Vec<f64>> {
    let hz_per_bin = rate_hz as f64 / n_fft as f64;
    Ok(corner_bins(n_mels, n_fft, rate_hz, f_min, f_max)?
        .iter()
        .map(|c| c[1] as f64 * hz_per_bin)
        .collect())
}

/// Triangular mel filterbank, `n_mels x (n_fft/2 + 1)`, each row peaking at 1.
pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    rate_hz: u32,
    f_min: f64,
    f_max: f64,
) -> Result<Grid2<f64>> {
    let corners = corner_bins(n_mels, n_fft, rate_hz, f_min, f_max)?;
    let n_bins = n_fft / 2 + 1;
    let mut bank = Grid2::zeros(n_mels, n_bins);
    for (m, &[l, c, u]) in corners.iter().enumerate() {
        if u >= n_bins {
            return Err(Error::Range(format!("mel filter {m} upper corner {u} out of {n_bins}")));
        }
        for k in l..=c {
            bank[(m, k)] = (k - l) as f64 / (c - l) as f64;
        }
        for k in c..=u {
            bank[(m, k)] = (u - k) as f64 / (u - c) as f64;
        }
        bank[(m, c)] = 1.0;
    }
    Ok(bank)
}

type BankKey = (usize, usize, u32);

fn shared_bank(n_mels: usize, n_fft: usize, rate_hz: u32) -> Result<Arc<Grid2<f64>>> {
    static CACHE: OnceLock<Mutex<BTreeMap<BankKey, Arc<Grid2<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut map = cache.lock().unwrap();
    if let Some(bank) = map.get(&(n_mels, n_fft, rate_hz)) {
        return Ok(bank.clone());
    }
    let bank = Arc::new(mel_filterbank(n_mels, n_fft, rate_hz, 0.0, rate_hz as f64 / 2.0)?);
    map.insert((n_mels, n_fft, rate_hz), bank.clone());
    Ok(bank)
}

/// Mel spectrogram: ln(filterbank · |X|² + ε), 44 bins per frame.
pub fn mel_spectrogram(seg: &Segment, p: &FrameParams) -> Result<FeatureMap> {
    let n_mels = FeatureKind::Ms.freq_bins();
    let spec = stft_complex(seg, p)?;
    let bank = shared_bank(n_mels, p.window_len, seg.sample_rate_hz)?;
    let mut out = Grid2::zeros(n_mels, spec.cols());
    let mut power = vec![0.0f64; spec.rows()];
    for t in 0..spec.cols() {
        for k in 0..spec.rows() {
            power[k] = spec[(k, t)].norm_sqr();
        }
        for m in 0..n_mels {
            let row = bank.row(m);
            let acc: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            out[(m, t)] = (acc + LOG_EPS).ln();
        }
    }
    FeatureMap::new(FeatureKind::Ms, to_f32(&out))
}

/// MFCC: column-wise orthonormal DCT-II of the mel spectrogram, 16 kept.
pub fn mfcc(seg: &Segment, p: &FrameParams) -> Result<FeatureMap> {
    let ms = mel_spectrogram(seg, p)?;
    let n_keep = FeatureKind::Mfcc.freq_bins();
    let mut out = Grid2::zeros(n_keep, ms.time_frames());
    let mut col = vec![0.0f64; ms.freq_bins()];
    for t in 0..ms.time_frames() {
        for m in 0..ms.freq_bins() {
            col[m] = ms.values[(m, t)] as f64;
        }
        for (k, &c) in dct_ii(&col, n_keep).iter().enumerate() {
            out[(k, t)] = c;
        }
    }
    FeatureMap::new(FeatureKind::Mfcc, to_f32(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_features::{test_segment, tone_segment};

    #[test]
    fn mel_scale_values() {
        assert!((hz_to_mel(1000.0) - 999.9855).abs() < 0.01);
        for hz in [0.0, 50.0, 440.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn filterbank_rows_are_unit_peak_triangles() {
        let bank = mel_filterbank(44, 4000, 16_000, 0.0, 8000.0).unwrap();
        assert_eq!((bank.rows(), bank.cols()), (44, 2001));
        for m in 0..44 {
            let row = bank.row(m);
            assert!(row.iter().all(|&w| w >= 0.0));
            assert_eq!(row.iter().cloned().fold(f64::MIN, f64::max), 1.0, "row {m}");
            let support: Vec<usize> =
                (0..row.len()).filter(|&k| row[k] > 0.0).collect();
            assert!(!support.is_empty());
            assert_eq!(support.last().unwrap() - support[0] + 1, support.len(), "row {m} gaps");
            let flat_sum: f64 = row.iter().sum();
            assert!(flat_sum > 0.0, "row {m}");
        }
    }

    #[test]
    fn filterbank_rejects_bad_band() {
        assert!(mel_filterbank(44, 4000, 16_000, 100.0, 9000.0).is_err());
        assert!(mel_filterbank(44, 4000, 16_000, 500.0, 400.0).is_err());
    }

    #[test]
    fn zero_segment_hits_log_floor() {
        let ms = mel_spectrogram(&test_segment(vec![0.0; 48_000]), &FrameParams::default()).unwrap();
        assert_eq!((ms.freq_bins(), ms.time_frames()), (44, 43));
        let floor = LOG_EPS.ln() as f32;
        assert!(ms.values.data().iter().all(|&v| v == floor));
    }

    #[test]
    fn tone_lands_in_nearest_filter() {
        let centers = mel_filter_center_frequencies(44, 4000, 16_000, 0.0, 8000.0).unwrap();
        let nearest = (0..44)
            .min_by(|&a, &b| {
                (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs())
            })
            .unwrap();
        let ms = mel_spectrogram(&tone_segment(1000.0, 0.9, 48_000), &FrameParams::default())
            .unwrap();
        for t in 0..ms.time_frames() {
            let argmax = (0..44)
                .max_by(|&a, &b| ms.values[(a, t)].total_cmp(&ms.values[(b, t)]))
                .unwrap();
            assert_eq!(argmax, nearest, "frame {t}");
        }
    }

    #[test]
    fn mfcc_of_zero_segment_is_dc_only() {
        let m = mfcc(&test_segment(vec![0.0; 48_000]), &FrameParams::default()).unwrap();
        assert_eq!((m.freq_bins(), m.time_frames()), (16, 43));
        let expected_c0 = (44f64.sqrt() * LOG_EPS.ln() as f32 as f64) as f32;
        for t in 0..43 {
            assert!((m.values[(0, t)] - expected_c0).abs() < 1e-3);
            for k in 1..16 {
                assert!(m.values[(k, t)].abs() < 1e-6, "coefficient {k}");
            }
        }
    }

    #[test]
    fn mfcc_is_columnwise_dct_of_ms() {
        let seg = tone_segment(740.0, 0.6, 48_000);
        let p = FrameParams::default();
        let ms = mel_spectrogram(&seg, &p).unwrap();
        let m = mfcc(&seg, &p).unwrap();
        for t in 0..ms.time_frames() {
            let col: Vec<f64> = (0..44).map(|i| ms.values[(i, t)] as f64).collect();
            let want = dct_ii(&col, 16);
            for k in 0..16 {
                assert_eq!(m.values[(k, t)], want[k] as f32, "frame {t} coefficient {k}");
            }
        }
    }
}
