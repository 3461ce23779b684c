//! Synthetic 4-class corpora for end-to-end validation.
//!
//! Two flavors:
//! - distinct: each class has an unmistakable tone/chirp signature, for
//!   checking that the pipeline can learn at all;
//! - overlapping: classes differ by two subtle cues buried in broadband
//!   noise. One cue is a low tone at 50 vs 58 Hz (inside the STFT's
//!   0..188 Hz band, below mel/ERB low-band resolution, blurred by the
//!   VQT's bandwidth floor), the other a high tone at 6000 vs 6400 Hz
//!   (invisible to the 48-bin STFT, separable on the mel and ERB scales).
//!   Most single feature families miss one cue outright and the noise
//!   degrades the other; combinations cover both bands at once.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::seeding::stream_seed;
use crate::signal_io::{write_manifest, write_wav, ManifestEntry};

pub const SAMPLE_RATE_HZ: u32 = 16_000;
pub const SEGMENT_SECONDS: f64 = 3.0;
pub const NUM_CLASSES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub recordings_per_class: usize,
    pub segments_per_recording: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Distinct,
    Overlapping,
}

fn add_tone(out: &mut [f64], freq: f64, amp: f64, phase: f64) {
    let w = TAU * freq / SAMPLE_RATE_HZ as f64;
    for (n, v) in out.iter_mut().enumerate() {
        *v += amp * (w * n as f64 + phase).sin();
    }
}

/// Linear chirp restarted at each segment boundary so every segment carries
/// the full sweep.
fn add_chirp(out: &mut [f64], f0: f64, f1: f64, amp: f64, seg_len: usize, phase: f64) {
    let rate = SAMPLE_RATE_HZ as f64;
    for (n, v) in out.iter_mut().enumerate() {
        let t = (n % seg_len) as f64 / rate;
        let dur = seg_len as f64 / rate;
        let f_inst = f0 + (f1 - f0) * t / (2.0 * dur);
        *v += amp * (TAU * f_inst * t + phase).sin();
    }
}

fn add_am_tone(out: &mut [f64], freq: f64, am_hz: f64, amp: f64, phase: f64) {
    let w = TAU * freq / SAMPLE_RATE_HZ as f64;
    let wa = TAU * am_hz / SAMPLE_RATE_HZ as f64;
    for (n, v) in out.iter_mut().enumerate() {
        let env = 0.5 * (1.0 + (wa * n as f64).sin());
        *v += amp * env * (w * n as f64 + phase).sin();
    }
}

fn add_gated_noise(out: &mut [f64], gate_hz: f64, amp: f64, rng: &mut ChaCha8Rng) {
    let period = (SAMPLE_RATE_HZ as f64 / gate_hz) as usize;
    for (n, v) in out.iter_mut().enumerate() {
        if (n % period) < period / 2 {
            *v += amp * rng.gen_range(-1.0..1.0);
        }
    }
}

fn add_noise(out: &mut [f64], amp: f64, rng: &mut ChaCha8Rng) {
    for v in out.iter_mut() {
        *v += amp * rng.gen_range(-1.0..1.0);
    }
}

fn render_recording(
    kind: CorpusKind,
    class: usize,
    len: usize,
    seg_len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f32> {
    let mut out = vec![0.0f64; len];
    let jitter = 1.0 + rng.gen_range(-0.02..0.02);
    let amp_jitter = 1.0 + rng.gen_range(-0.15..0.15);
    let phase = rng.gen_range(0.0..TAU);
    match kind {
        CorpusKind::Distinct => match class {
            0 => {
                add_tone(&mut out, 350.0 * jitter, 0.30 * amp_jitter, phase);
                add_tone(&mut out, 700.0 * jitter, 0.15 * amp_jitter, phase * 0.7);
            }
            1 => {
                add_chirp(&mut out, 800.0 * jitter, 1600.0 * jitter, 0.30 * amp_jitter, seg_len, phase);
            }
            2 => {
                add_am_tone(&mut out, 2200.0 * jitter, 4.0, 0.28 * amp_jitter, phase);
                add_tone(&mut out, 3000.0 * jitter, 0.18 * amp_jitter, phase * 1.3);
            }
            _ => {
                add_gated_noise(&mut out, 2.0, 0.25 * amp_jitter, rng);
                add_tone(&mut out, 5000.0 * jitter, 0.12 * amp_jitter, phase);
            }
        },
        CorpusKind::Overlapping => {
            let low = if class < 2 { 50.0 } else { 58.0 };
            let high = if class.is_multiple_of(2) { 6000.0 } else { 6400.0 };
            let low_jitter = rng.gen_range(-0.8..0.8);
            let high_jitter = rng.gen_range(-40.0..40.0);
            add_tone(&mut out, low + low_jitter, 0.20 * amp_jitter, phase);
            add_tone(&mut out, high + high_jitter, 0.16 * amp_jitter, phase * 0.9);
        }
    }
    add_noise(&mut out, if kind == CorpusKind::Distinct { 0.04 } else { 0.30 }, rng);
    out.iter().map(|&v| v.clamp(-1.0, 1.0) as f32).collect()
}

/// Write `4 * recordings_per_class` WAV recordings plus a manifest under
/// `dir`; returns the manifest path. Deterministic in (kind, config).
pub fn generate_corpus(dir: &Path, kind: CorpusKind, cfg: &SynthConfig) -> Result<PathBuf> {
    let wav_dir = dir.join("wavs");
    fs::create_dir_all(&wav_dir)?;
    let seg_len = (SAMPLE_RATE_HZ as f64 * SEGMENT_SECONDS) as usize;
    let len = seg_len * cfg.segments_per_recording;
    let mut entries = Vec::new();
    for class in 0..NUM_CLASSES {
        for rec in 0..cfg.recordings_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(
                cfg.seed,
                (class * 100_000 + rec) as u64,
            ));
            let samples = render_recording(kind, class, len, seg_len, &mut rng);
            let id = format!("class{class}_rec{rec:03}");
            let rel = format!("wavs/{id}.wav");
            write_wav(wav_dir.join(format!("{id}.wav")), &samples, SAMPLE_RATE_HZ)?;
            entries.push(ManifestEntry {
                recording_id: id,
                path: rel,
                class_label: class,
            });
        }
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}
