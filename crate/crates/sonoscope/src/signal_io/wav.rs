//! RIFF/WAVE reader and writer.
//!
//! Reads PCM 16-bit and IEEE-float 32-bit files with one or two channels;
//! everything else is rejected. Stereo is mixed down by averaging the two
//! channels per frame. The parser is defensive: it never trusts declared
//! chunk sizes beyond the bytes actually present.

use std::path::Path;

use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;

const FMT_PCM: u16 = 1;
const FMT_IEEE_FLOAT: u16 = 3;

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits_per_sample: u16,
}

fn read_u16(bytes: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_le_bytes(bytes.get(at..at + 2)?.try_into().ok()?))
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(bytes.get(at..at + 4)?.try_into().ok()?))
}

fn parse_fmt(chunk: &[u8]) -> Result<FmtChunk> {
    if chunk.len() < 16 {
        return Err(Error::Format("fmt chunk shorter than 16 bytes".into()));
    }
    Ok(FmtChunk {
        format_tag: read_u16(chunk, 0).unwrap(),
        channels: read_u16(chunk, 2).unwrap(),
        sample_rate: read_u32(chunk, 4).unwrap(),
        block_align: read_u16(chunk, 12).unwrap(),
        bits_per_sample: read_u16(chunk, 14).unwrap(),
    })
}

/// Decode a complete WAV file image into mono samples in [-1, 1] plus the
/// native sample rate. Stereo input is averaged per frame.
pub fn parse_wav(bytes: &[u8]) -> Result<(Vec<f32>, u32)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4).unwrap() as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).ok_or_else(|| {
            Error::Format("chunk size overflows".into())
        })?;
        if body_end > bytes.len() {
            return Err(Error::Format(format!(
                "chunk {:?} declares {size} bytes past end of file",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry one pad byte.
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| Error::Format("no fmt chunk before data".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;

    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(Error::Unsupported(format!("{} channels", fmt.channels)));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::Format("zero sample rate".into()));
    }
    let decode: fn(&[u8]) -> f32 = match (fmt.format_tag, fmt.bits_per_sample) {
        (FMT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0,
        (FMT_IEEE_FLOAT, 32) => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
        (tag, bits) => {
            return Err(Error::Unsupported(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    let bytes_per_sample = fmt.bits_per_sample as usize / 8;
    let frame_bytes = bytes_per_sample * fmt.channels as usize;
    if fmt.block_align as usize != frame_bytes {
        return Err(Error::Format(format!(
            "block align {} does not match {} bytes per frame",
            fmt.block_align, frame_bytes
        )));
    }

    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let at = f * frame_bytes;
        let mut acc = 0.0f32;
        for ch in 0..fmt.channels as usize {
            let s = decode(&data[at + ch * bytes_per_sample..]);
            if !s.is_finite() {
                return Err(Error::Format("non-finite sample value".into()));
            }
            acc += s;
        }
        samples.push((acc / fmt.channels as f32).clamp(-1.0, 1.0));
    }
    Ok((samples, fmt.sample_rate))
}

/// Read a WAV file into an [`AudioBuffer`]. The recording id defaults to the
/// file stem; the corpus manifest normally overrides it.
pub fn read_wav<P: AsRef<Path>>(path: P) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let (samples, sample_rate_hz) = parse_wav(&bytes)?;
    let recording_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(AudioBuffer { samples, sample_rate_hz, recording_id, class_label: 0 })
}

/// Write mono samples as 16-bit PCM. Values are clamped to [-1, 1].
pub fn write_wav<P: AsRef<Path>>(path: P, samples: &[f32], sample_rate_hz: u32) -> Result<()> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FMT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_mono(rate: u32, samples: &[i16]) -> Vec<u8> {
        let data_len = samples.len() * 2;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2).to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for &s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn pcm16_scaling() {
        let bytes = pcm16_mono(16000, &[0, 16384, -16384]);
        let (samples, rate) = parse_wav(&bytes).unwrap();
        assert_eq!(rate, 16000);
        assert_eq!(samples, vec![0.0, 0.5, -0.5]);
    }

    #[test]
    fn stereo_averages_channels() {
        // one frame: left = 1.0 (32767/32768 after PCM quantization is not
        // exactly 1.0, so use float encoding for the exact case)
        let mut out = Vec::new();
        let data_len = 8;
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&3u16.to_le_bytes()); // IEEE float
        out.extend_from_slice(&2u16.to_le_bytes()); // stereo
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&(16000u32 * 8).to_le_bytes());
        out.extend_from_slice(&8u16.to_le_bytes());
        out.extend_from_slice(&32u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        out.extend_from_slice(&1.0f32.to_le_bytes());
        out.extend_from_slice(&0.0f32.to_le_bytes());
        let (samples, _) = parse_wav(&out).unwrap();
        assert_eq!(samples, vec![0.5]);
    }

    #[test]
    fn rejects_24_bit_pcm() {
        let mut bytes = pcm16_mono(16000, &[0, 0]);
        bytes[34] = 24; // bits per sample
        bytes[32] = 3; // block align for mono 24-bit
        match parse_wav(&bytes) {
            Err(Error::Unsupported(_)) => {}
            other => panic!("expected Unsupported, got {other:?}"),
        }
    }

    #[test]
    fn rejects_truncated_chunk() {
        let mut bytes = pcm16_mono(16000, &[1, 2, 3]);
        let n = bytes.len();
        bytes.truncate(n - 2);
        assert!(matches!(parse_wav(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_wav(b"not a wav"), Err(Error::Format(_))));
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let samples: Vec<f32> = (0..100).map(|i| (i as f32 / 50.0).sin() * 0.5).collect();
        write_wav(&path, &samples, 16000).unwrap();
        let buf = read_wav(&path).unwrap();
        assert_eq!(buf.sample_rate_hz, 16000);
        assert_eq!(buf.recording_id, "t");
        assert_eq!(buf.samples.len(), samples.len());
        for (a, b) in buf.samples.iter().zip(&samples) {
            assert!((a - b).abs() < 1.0 / 32768.0 + 1e-6);
        }
    }
}
