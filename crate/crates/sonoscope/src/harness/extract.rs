//! Feature extraction into the on-disk cache, plus the recording index and
//! the dataset split command.
//!
//! Cache layout:
//!
//! ```text
//! <cache_dir>/index.csv                     recording_id,class_label,segments
//! <cache_dir>/<recording_id>/seg0000/ms.tffm
//!                                    mfcc.tffm ... (one per feature kind)
//! ```
//!
//! Extraction is idempotent: a cache file is rewritten only when its bytes
//! would change. Unreadable recordings are logged and skipped; the command
//! reports them so the CLI can signal partial failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::signal_io::{
    read_manifest, read_wav, resample, segment, split_dataset, split_to_csv, AudioBuffer,
    ManifestEntry, RecordingSummary, Segment, SplitManifest,
};
use crate::tf_features::{encode_feature_map, extract, FeatureKind};

use super::config::RunConfig;

pub const TARGET_RATE_HZ: u32 = 16_000;
pub const SEGMENT_SECONDS: f64 = 3.0;
pub const INDEX_HEADER: &str = "recording_id,class_label,segments";
pub const ERROR_LOG: &str = "extract_errors.log";

#[derive(Debug, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub recordings: usize,
    pub written: usize,
    pub skipped: usize,
    /// (recording_id, message), sorted by id.
    pub failures: Vec<(String, String)>,
}

fn kind_file(kind: FeatureKind) -> String {
    format!("{}.tffm", kind.name().to_ascii_lowercase())
}

pub fn segment_dir(cache_dir: &Path, recording_id: &str, segment_index: usize) -> PathBuf {
    cache_dir.join(recording_id).join(format!("seg{segment_index:04}"))
}

pub fn cache_file(
    cache_dir: &Path,
    recording_id: &str,
    segment_index: usize,
    kind: FeatureKind,
) -> PathBuf {
    segment_dir(cache_dir, recording_id, segment_index).join(kind_file(kind))
}

/// Write `bytes` to `path` unless an identical file is already there.
/// Returns true when a write happened.
fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool> {
    if let Ok(existing) = std::fs::read(path) {
        if existing == bytes {
            return Ok(false);
        }
    }
    std::fs::write(path, bytes)?;
    Ok(true)
}

fn load_recording(manifest_dir: &Path, entry: &ManifestEntry) -> Result<AudioBuffer> {
    let path = {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_dir.join(p)
        }
    };
    let mut buf = read_wav(&path)?;
    buf.recording_id = entry.recording_id.clone();
    buf.class_label = entry.class_label;
    if buf.sample_rate_hz != TARGET_RATE_HZ {
        buf = resample(&buf, TARGET_RATE_HZ)?;
    }
    Ok(buf)
}

/// Extract all six feature kinds for one segment; returns (written, skipped).
fn extract_segment(cache_dir: &Path, seg: &Segment, cfg: &RunConfig) -> Result<(usize, usize)> {
    let dir = segment_dir(cache_dir, &seg.recording_id, seg.segment_index);
    std::fs::create_dir_all(&dir)?;
    let mut written = 0;
    let mut skipped = 0;
    for kind in FeatureKind::ALL {
        let map = extract(kind, seg, &cfg.frame)?;
        let bytes = encode_feature_map(&map);
        if write_if_changed(&dir.join(kind_file(kind)), &bytes)? {
            written += 1;
        } else {
            skipped += 1;
        }
    }
    Ok((written, skipped))
}

pub fn index_path(cache_dir: &Path) -> PathBuf {
    cache_dir.join("index.csv")
}

fn write_index(cache_dir: &Path, summaries: &BTreeMap<String, RecordingSummary>) -> Result<()> {
    let mut text = String::from(INDEX_HEADER);
    text.push('\n');
    for s in summaries.values() {
        text.push_str(&format!("{},{},{}\n", s.recording_id, s.class_label, s.segment_count));
    }
    write_if_changed(&index_path(cache_dir), text.as_bytes())?;
    Ok(())
}

pub fn read_index(cache_dir: &Path) -> Result<Vec<RecordingSummary>> {
    let path = index_path(cache_dir);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {path:?} (run extract first): {e}")))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == INDEX_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "index header mismatch: expected {INDEX_HEADER:?}, got {:?}",
                other.map(|(_, h)| h)
            )))
        }
    }
    let mut out: Vec<RecordingSummary> = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!("index line {}: expected 3 fields", lineno + 1)));
        }
        let class_label = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("index line {}: bad class label", lineno + 1)))?;
        let segment_count = fields[2]
            .parse()
            .map_err(|_| Error::Format(format!("index line {}: bad segment count", lineno + 1)))?;
        if out.iter().any(|r: &RecordingSummary| r.recording_id == fields[0]) {
            return Err(Error::Format(format!("duplicate recording id {:?}", fields[0])));
        }
        out.push(RecordingSummary {
            recording_id: fields[0].to_string(),
            class_label,
            segment_count,
        });
    }
    Ok(out)
}

/// Run feature extraction over the whole manifest.
///
/// A failure on one recording (unreadable file, malformed WAV, too short to
/// yield a segment) is recorded and the rest of the corpus still processes.
/// Segment-level work fans out over `cfg.workers` threads.
pub fn cmd_extract(cfg: &RunConfig, cache_dir: &Path) -> Result<ExtractStats> {
    let entries = read_manifest(&cfg.manifest)?;
    let manifest_dir = cfg.manifest.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    {
        let mut ids: Vec<&str> = entries.iter().map(|e| e.recording_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != entries.len() {
            return Err(Error::Format("manifest contains duplicate recording ids".into()));
        }
    }
    std::fs::create_dir_all(cache_dir)?;

    let mut stats = ExtractStats::default();
    let mut summaries: BTreeMap<String, RecordingSummary> = BTreeMap::new();
    for entry in &entries {
        let buf = match load_recording(&manifest_dir, entry) {
            Ok(buf) => buf,
            Err(e) => {
                stats.failures.push((entry.recording_id.clone(), e.to_string()));
                continue;
            }
        };
        let segments = segment(&buf, SEGMENT_SECONDS);
        if segments.is_empty() {
            stats.failures.push((
                entry.recording_id.clone(),
                format!("no complete {SEGMENT_SECONDS} s segment in {} samples", buf.samples.len()),
            ));
            continue;
        }

        let queue: Mutex<Vec<&Segment>> = Mutex::new(segments.iter().collect());
        let tallies: Mutex<Vec<Result<(usize, usize)>>> = Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..cfg.workers.min(segments.len()) {
                scope.spawn(|| loop {
                    let seg = match queue.lock().unwrap().pop() {
                        Some(seg) => seg,
                        None => break,
                    };
                    let res = extract_segment(cache_dir, seg, cfg);
                    tallies.lock().unwrap().push(res);
                });
            }
        });
        let mut failed = false;
        for res in tallies.into_inner().unwrap() {
            match res {
                Ok((w, s)) => {
                    stats.written += w;
                    stats.skipped += s;
                }
                Err(e) => {
                    if !failed {
                        stats.failures.push((entry.recording_id.clone(), e.to_string()));
                        failed = true;
                    }
                }
            }
        }
        if !failed {
            stats.recordings += 1;
            summaries.insert(
                entry.recording_id.clone(),
                RecordingSummary {
                    recording_id: entry.recording_id.clone(),
                    class_label: entry.class_label,
                    segment_count: segments.len(),
                },
            );
        }
    }
    stats.failures.sort();

    write_index(cache_dir, &summaries)?;
    let log_path = cache_dir.join(ERROR_LOG);
    if stats.failures.is_empty() {
        if log_path.exists() {
            std::fs::remove_file(&log_path)?;
        }
    } else {
        let mut log = String::new();
        for (id, msg) in &stats.failures {
            log.push_str(&format!("{id}: {msg}\n"));
        }
        std::fs::write(&log_path, log)?;
    }
    Ok(stats)
}

pub fn split_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("split.csv")
}

/// Assign recordings to train/val/test and persist the split CSV.
pub fn cmd_split(cfg: &RunConfig, cache_dir: &Path) -> Result<SplitManifest> {
    let recordings = read_index(cache_dir)?;
    let manifest = split_dataset(&recordings, cfg.split_ratios, cfg.split_seed)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_if_changed(&split_path(cfg), split_to_csv(&manifest).as_bytes())?;
    Ok(manifest)
}
