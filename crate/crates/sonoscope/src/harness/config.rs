//! Run configuration: flat `key = value` sections in plain text.
//!
//! ```text
//! [corpus]
//! manifest = corpus/manifest.csv
//! output_dir = out
//!
//! [split]
//! ratios = 0.7,0.1,0.2
//! seed = 0
//!
//! [train]
//! max_epochs = 150
//!
//! [sweep]
//! seeds = 0,1,2
//! combos = all
//! ```
//!
//! Unknown sections or keys are errors; every key has a default except the
//! two corpus paths. Relative paths are resolved against the config file's
//! directory by `load_config`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feature_stack::{enumerate_combinations, CombinationId};
use crate::hltdnn::TrainConfig;
use crate::tf_features::{FeatureKind, FrameParams};

#[derive(Debug, Clone, PartialEq)]
pub enum ComboSelection {
    All,
    List(Vec<CombinationId>),
}

impl ComboSelection {
    /// The selected combinations in ascending bitmask order.
    pub fn resolve(&self) -> Result<Vec<CombinationId>> {
        match self {
            ComboSelection::All => enumerate_combinations(FeatureKind::ALL.len() as u32),
            ComboSelection::List(list) => Ok(list.clone()),
        }
    }

    pub fn parse(text: &str) -> Result<ComboSelection> {
        if text.trim().eq_ignore_ascii_case("all") {
            return Ok(ComboSelection::All);
        }
        let mut list = Vec::new();
        for part in text.split(',') {
            let combo = CombinationId::parse(part.trim())
                .map_err(|e| Error::Config(format!("combos: {e}")))?;
            if list.contains(&combo) {
                return Err(Error::Config(format!("duplicate combo {}", combo.name())));
            }
            list.push(combo);
        }
        if list.is_empty() {
            return Err(Error::Config("empty combo list".into()));
        }
        Ok(ComboSelection::List(list))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Default cache location; `SONOSCOPE_CACHE_DIR` takes precedence when
    /// the caller passes it down.
    pub cache_dir: Option<PathBuf>,
    pub frame: FrameParams,
    pub split_ratios: [f64; 3],
    pub split_seed: u64,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub combos: ComboSelection,
    pub workers: usize,
}

impl RunConfig {
    /// Cache directory precedence: env override, then config, then
    /// `<output_dir>/cache`.
    pub fn cache_dir(&self, env_override: Option<&Path>) -> PathBuf {
        if let Some(p) = env_override {
            return p.to_path_buf();
        }
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config(format!("seeds must be distinct: {:?}", self.seeds)));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.split_ratios.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive: {:?}", self.split_ratios)));
        }
        let sum: f64 = self.split_ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
        }
        self.train.validate()?;
        Ok(())
    }
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value.parse().map_err(|_| Error::Config(format!("{key}: expected an integer, got {value:?}")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| Error::Config(format!("{key}: expected an integer, got {value:?}")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| Error::Config(format!("{key}: expected a number, got {value:?}")))
}

/// Parse config text. Relative paths are left as-is; use `load_config` to
/// resolve them against the file location.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut manifest: Option<PathBuf> = None;
    let mut output_dir: Option<PathBuf> = None;
    let mut cache_dir: Option<PathBuf> = None;
    let mut window = 4000usize;
    let mut hop = 1024usize;
    let mut ratios = [0.7, 0.1, 0.2];
    let mut split_seed = 0u64;
    let mut train = TrainConfig::default();
    let mut seeds = vec![0u64, 1, 2];
    let mut combos = ComboSelection::All;
    let mut workers = 1usize;

    let mut section = String::new();
    let mut seen: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: malformed section", lineno + 1)))?;
            if !matches!(name, "corpus" | "features" | "split" | "train" | "sweep") {
                return Err(Error::Config(format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let full = format!("{section}.{key}");
        if seen.contains(&full) {
            return Err(Error::Config(format!("duplicate key {full}")));
        }
        seen.push(full.clone());
        match full.as_str() {
            "corpus.manifest" => manifest = Some(PathBuf::from(value)),
            "corpus.output_dir" => output_dir = Some(PathBuf::from(value)),
            "corpus.cache_dir" => cache_dir = Some(PathBuf::from(value)),
            "features.window" => window = parse_usize(&full, value)?,
            "features.hop" => hop = parse_usize(&full, value)?,
            "split.ratios" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!(
                        "split.ratios: expected three values, got {value:?}"
                    )));
                }
                for (i, p) in parts.iter().enumerate() {
                    ratios[i] = parse_f64(&full, p)?;
                }
            }
            "split.seed" => split_seed = parse_u64(&full, value)?,
            "train.lr" => train.lr = parse_f64(&full, value)?,
            "train.batch" => train.batch = parse_usize(&full, value)?,
            "train.max_epochs" => train.max_epochs = parse_usize(&full, value)?,
            "train.patience" => train.patience = parse_usize(&full, value)?,
            "train.dropout" => train.dropout = parse_f64(&full, value)?,
            "sweep.seeds" => {
                seeds = value
                    .split(',')
                    .map(|s| parse_u64(&full, s.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "sweep.combos" => combos = ComboSelection::parse(value)?,
            "sweep.workers" => workers = parse_usize(&full, value)?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown key {key:?} in section [{section}]"
                )))
            }
        }
    }

    let cfg = RunConfig {
        manifest: manifest.ok_or_else(|| Error::Config("corpus.manifest is required".into()))?,
        output_dir: output_dir
            .ok_or_else(|| Error::Config("corpus.output_dir is required".into()))?,
        cache_dir,
        frame: FrameParams::new(window, hop)
            .map_err(|e| Error::Config(format!("features: {e}")))?,
        split_ratios: ratios,
        split_seed,
        train,
        seeds,
        combos,
        workers,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Read a config file, resolving relative paths against its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {path:?}: {e}")))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for p in [&mut cfg.manifest, &mut cfg.output_dir] {
        if p.is_relative() {
            *p = base.join(&p);
        }
    }
    if let Some(c) = cfg.cache_dir.as_mut() {
        if c.is_relative() {
            *c = base.join(&c);
        }
    }
    if !cfg.manifest.is_file() {
        return Err(Error::Config(format!("manifest {:?} does not exist", cfg.manifest)));
    }
    Ok(cfg)
}
