//! Band-limited sample-rate conversion.
//!
//! Rational polyphase resampler: upsample by L, windowed-sinc lowpass at the
//! smaller of the two Nyquist frequencies, downsample by M. The prototype
//! filter uses a Kaiser window (beta 8.6) with 32 taps per phase. Matching
//! input and output rates is a bit-exact pass-through.

use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;

const TAPS_PER_PHASE: usize = 32;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-16 {
            return sum;
        }
        k += 1.0;
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Kaiser-windowed sinc prototype for upsample factor `l`, downsample
/// factor `m`. Length 32*l + 1, centered, cutoff min(fs_in, fs_out)/2,
/// gain l to compensate for zero insertion.
fn prototype_filter(l: usize, m: usize) -> Vec<f64> {
    let n = TAPS_PER_PHASE * l + 1;
    let center = (TAPS_PER_PHASE * l / 2) as f64;
    // Cutoff in cycles per upsampled sample.
    let cutoff = (l as f64 / m as f64).min(1.0) / (2.0 * l as f64);
    let i0_beta = bessel_i0(KAISER_BETA);
    (0..n)
        .map(|i| {
            let t = i as f64 - center;
            let frac = t / center;
            let window = bessel_i0(KAISER_BETA * (1.0 - frac * frac).max(0.0).sqrt()) / i0_beta;
            l as f64 * 2.0 * cutoff * sinc(2.0 * cutoff * t) * window
        })
        .collect()
}

/// Resample to `target_hz`. Identity (bit-exact clone) when the rate already
/// matches. Output length is ceil(len * target / source); the first and last
/// outputs see the filter roll in over zero padding.
pub fn resample(buf: &AudioBuffer, target_hz: u32) -> Result<AudioBuffer> {
    if buf.samples.is_empty() {
        return Err(Error::EmptyInput("resample"));
    }
    if target_hz == 0 {
        return Err(Error::Range("target sample rate must be positive".into()));
    }
    if target_hz == buf.sample_rate_hz {
        return Ok(buf.clone());
    }

    let g = gcd(buf.sample_rate_hz, target_hz);
    let l = (target_hz / g) as usize;
    let m = (buf.sample_rate_hz / g) as usize;
    let h = prototype_filter(l, m);
    let n_taps = h.len();
    let center = TAPS_PER_PHASE * l / 2;

    let n_in = buf.samples.len();
    let n_out = (n_in * l).div_ceil(m);
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let u = n * m + center;
        // Filter support: 0 <= u - l*k < n_taps, input index k in [0, n_in).
        let k_min = (u + 1).saturating_sub(n_taps).div_ceil(l);
        let k_max = (u / l).min(n_in - 1);
        let mut acc = 0.0f64;
        for k in k_min..=k_max {
            acc += h[u - l * k] * buf.samples[k] as f64;
        }
        out.push(acc as f32);
    }

    Ok(AudioBuffer {
        samples: out,
        sample_rate_hz: target_hz,
        recording_id: buf.recording_id.clone(),
        class_label: buf.class_label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(rate: u32, hz: f64, n: usize, amp: f32) -> AudioBuffer {
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * hz * i as f64 / rate as f64).sin() as f32)
            .collect();
        AudioBuffer { samples, sample_rate_hz: rate, recording_id: "tone".into(), class_label: 0 }
    }

    /// Naive DFT magnitude-squared at every one-sided bin.
    fn dft_power(x: &[f32]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let mut re = 0.0f64;
                let mut im = 0.0f64;
                for (i, &v) in x.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * k as f64 * i as f64 / n as f64;
                    re += v as f64 * ang.cos();
                    im += v as f64 * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn identity_when_rates_match() {
        let buf = tone(16000, 440.0, 1000, 0.8);
        let out = resample(&buf, 16000).unwrap();
        assert_eq!(out.samples, buf.samples);
    }

    #[test]
    fn empty_input_rejected() {
        let buf = AudioBuffer {
            samples: vec![],
            sample_rate_hz: 16000,
            recording_id: "e".into(),
            class_label: 0,
        };
        assert!(matches!(resample(&buf, 8000), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn upsample_length() {
        let buf = tone(8000, 100.0, 8000, 0.5);
        let out = resample(&buf, 16000).unwrap();
        assert!((out.samples.len() as i64 - 16000).abs() <= 1);
        assert_eq!(out.sample_rate_hz, 16000);
    }

    #[test]
    fn downsample_preserves_tone_bin() {
        // 0.25 s of a 1 kHz tone at 32 kHz -> 16 kHz. In the 4000-point
        // output DFT the tone sits exactly on bin 250.
        let buf = tone(32000, 1000.0, 8000, 0.8);
        let out = resample(&buf, 16000).unwrap();
        assert_eq!(out.samples.len(), 4000);
        let power = dft_power(&out.samples[..4000]);
        let peak_bin = power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak_bin, 250);
        let peak = power[250];
        let sidelobes: f64 = power
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as i64 - 250).unsigned_abs() > 2)
            .map(|(_, p)| p)
            .sum();
        assert!(sidelobes < 1e-3 * peak, "sidelobe ratio {}", sidelobes / peak);
    }

    #[test]
    fn chained_resample_preserves_dominant_bin() {
        // 2 kHz tone at 16 kHz -> 32 kHz -> 16 kHz keeps its dominant bin.
        let buf = tone(16000, 2000.0, 4000, 0.7);
        let up = resample(&buf, 32000).unwrap();
        let back = resample(&up, 16000).unwrap();
        let power = dft_power(&back.samples[..4000]);
        let peak_bin = power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak_bin, 500); // 2000 Hz * 4000 / 16000
    }

    #[test]
    fn fractional_ratio_preserves_tone() {
        // 22050 -> 16000 exercises a non-trivial L/M pair (gcd 50).
        let buf = tone(22050, 1000.0, 22050, 0.6);
        let out = resample(&buf, 16000).unwrap();
        assert!((out.samples.len() as i64 - 16000).abs() <= 1);
        let power = dft_power(&out.samples[..4000]);
        let peak_bin = power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak_bin, 250);
    }
}
