//! Corpus and split manifests.
//!
//! Both files are plain comma-separated text with a header row. Recording
//! ids are restricted to `[A-Za-z0-9._-]` so they can double as cache file
//! names; paths must not contain commas (no quoting).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal_io::{Partition, SplitManifest};

pub const MANIFEST_HEADER: &str = "recording_id,path,class_label";
pub const SPLIT_HEADER: &str = "recording_id,partition,seed";

/// One corpus row: where a recording lives and what class it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub recording_id: String,
    pub path: String,
    pub class_label: usize,
}

fn valid_recording_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || b == b'-')
}

/// Parse the corpus manifest (`recording_id,path,class_label`).
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == MANIFEST_HEADER => {}
        _ => return Err(Error::Format(format!("manifest must start with `{MANIFEST_HEADER}`"))),
    }
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (id, path, label) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(id), Some(path), Some(label), None) => (id, path, label),
            _ => {
                return Err(Error::Format(format!(
                    "manifest line {}: expected 3 comma-separated fields",
                    lineno + 1
                )))
            }
        };
        if !valid_recording_id(id) {
            return Err(Error::Format(format!(
                "manifest line {}: invalid recording id {id:?}",
                lineno + 1
            )));
        }
        if path.is_empty() {
            return Err(Error::Format(format!("manifest line {}: empty path", lineno + 1)));
        }
        let class_label: usize = label.parse().map_err(|_| {
            Error::Format(format!("manifest line {}: bad class label {label:?}", lineno + 1))
        })?;
        if !seen.insert(id.to_string()) {
            return Err(Error::Format(format!(
                "manifest line {}: duplicate recording id {id:?}",
                lineno + 1
            )));
        }
        entries.push(ManifestEntry {
            recording_id: id.to_string(),
            path: path.to_string(),
            class_label,
        });
    }
    Ok(entries)
}

pub fn read_manifest<P: AsRef<Path>>(path: P) -> Result<Vec<ManifestEntry>> {
    parse_manifest(&std::fs::read_to_string(path)?)
}

pub fn write_manifest<P: AsRef<Path>>(path: P, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = String::from(MANIFEST_HEADER);
    text.push('\n');
    for e in entries {
        writeln!(text, "{},{},{}", e.recording_id, e.path, e.class_label).unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Serialize a split manifest (`recording_id,partition,seed`).
pub fn split_to_csv(manifest: &SplitManifest) -> String {
    let mut text = String::from(SPLIT_HEADER);
    text.push('\n');
    for (id, partition) in &manifest.assignments {
        writeln!(text, "{},{},{}", id, partition.as_str(), manifest.seed).unwrap();
    }
    text
}

/// Parse a split manifest produced by [`split_to_csv`]. Achieved ratios are
/// not stored in the file and come back as zeros.
pub fn parse_split_csv(text: &str) -> Result<SplitManifest> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == SPLIT_HEADER => {}
        _ => return Err(Error::Format(format!("split file must start with `{SPLIT_HEADER}`"))),
    }
    let mut manifest = SplitManifest {
        assignments: Default::default(),
        seed: 0,
        achieved_ratios: [0.0; 3],
    };
    let mut first = true;
    for (lineno, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (id, part, seed) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(id), Some(part), Some(seed), None) => (id, part, seed),
            _ => {
                return Err(Error::Format(format!(
                    "split line {}: expected 3 comma-separated fields",
                    lineno + 1
                )))
            }
        };
        if !valid_recording_id(id) {
            return Err(Error::Format(format!("split line {}: invalid id {id:?}", lineno + 1)));
        }
        let partition = Partition::from_str(part).ok_or_else(|| {
            Error::Format(format!("split line {}: unknown partition {part:?}", lineno + 1))
        })?;
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::Format(format!("split line {}: bad seed {seed:?}", lineno + 1)))?;
        if first {
            manifest.seed = seed;
            first = false;
        } else if manifest.seed != seed {
            return Err(Error::Format(format!("split line {}: inconsistent seed", lineno + 1)));
        }
        if manifest.assignments.insert(id.to_string(), partition).is_some() {
            return Err(Error::Format(format!("split line {}: duplicate id {id:?}", lineno + 1)));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let text = "recording_id,path,class_label\nrec-01,audio/rec-01.wav,0\nrec_02,audio/x.wav,3\n";
        let entries = parse_manifest(text).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].recording_id, "rec-01");
        assert_eq!(entries[1].class_label, 3);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse_manifest("id,path,label\nx,y,0\n").is_err());
    }

    #[test]
    fn rejects_duplicate_id() {
        let text = "recording_id,path,class_label\na,x.wav,0\na,y.wav,1\n";
        assert!(matches!(parse_manifest(text), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_id_with_separator() {
        let text = "recording_id,path,class_label\n../evil,x.wav,0\n";
        assert!(matches!(parse_manifest(text), Err(Error::Format(_))));
    }

    #[test]
    fn split_round_trip() {
        let mut manifest = SplitManifest {
            assignments: Default::default(),
            seed: 7,
            achieved_ratios: [0.7, 0.15, 0.15],
        };
        manifest.assignments.insert("a".into(), Partition::Train);
        manifest.assignments.insert("b".into(), Partition::Test);
        let csv = split_to_csv(&manifest);
        let back = parse_split_csv(&csv).unwrap();
        assert_eq!(back.assignments, manifest.assignments);
        assert_eq!(back.seed, 7);
    }
}
