//! Training runs over feature combinations.
//!
//! Each (combo, seed) pair owns `runs/<combo>/<seed>/` inside the output
//! directory:
//!
//! ```text
//! config            key = value description of the run
//! history.csv       epoch,train_loss,val_loss
//! checkpoint.best   HLTC weights + Adagrad accumulators at the best epoch
//! eval.json         test metrics, predictions, penultimate-feature FDR
//! diverged.txt      present instead of a checkpoint when training diverged
//! ```
//!
//! A run whose checkpoint already exists is never retrained; resuming an
//! interrupted sweep therefore reproduces exactly the uninterrupted result.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_stack::{normalize, stack, CombinationId, FeatureStats, StatsAccumulator};
use crate::hltdnn::{
    build_model, evaluate, load_checkpoint, penultimate, save_checkpoint, train, ModelConfig,
    ModelState, Sample,
};
use crate::signal_io::{parse_split_csv, Partition};
use crate::tf_features::{read_feature_map, FeatureKind, FeatureMap};

use super::config::RunConfig;
use super::extract::{cache_file, read_index, split_path};
use super::report::{cmd_report, ReportOutcome};

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_loss";

pub fn run_dir(cfg: &RunConfig, combo: CombinationId, seed: u64) -> PathBuf {
    cfg.output_dir.join("runs").join(combo.name()).join(seed.to_string())
}

/// Persisted evaluation record for one completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEval {
    pub combo: String,
    pub seed: u64,
    pub num_classes: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub test_loss: f64,
    pub test_accuracy: f64,
    /// `None` when the test split is too degenerate for a separability score.
    pub log_fdr: Option<f64>,
    /// `recording_id#segment_index`, aligned with labels and predictions.
    pub segments: Vec<String>,
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Trained,
    Resumed,
    Diverged { epoch: usize },
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub trained: usize,
    pub resumed: usize,
    /// (combo name, seed, epoch) for every diverged run.
    pub diverged: Vec<(String, u64, usize)>,
    pub report: ReportOutcome,
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub evaluated: Vec<RunEval>,
    /// (combo name, seed) pairs with no checkpoint on disk.
    pub missing: Vec<(String, u64)>,
}

#[derive(Debug, Clone)]
struct SegmentRef {
    recording_id: String,
    class_label: usize,
    segment_index: usize,
}

/// All cached feature maps needed by the configured combos, z-scored with
/// training-split statistics, grouped by partition.
pub(super) struct FeatureTable {
    pub(super) num_classes: usize,
    kinds: Vec<FeatureKind>,
    refs: [Vec<SegmentRef>; 3],
    /// maps[partition][segment][position matching `kinds`]
    maps: [Vec<Vec<FeatureMap>>; 3],
}

fn union_kinds(combos: &[CombinationId]) -> Vec<FeatureKind> {
    FeatureKind::ALL
        .into_iter()
        .filter(|k| combos.iter().any(|c| c.kinds().contains(k)))
        .collect()
}

pub(super) fn load_table(
    cfg: &RunConfig,
    cache_dir: &Path,
    combos: &[CombinationId],
) -> Result<FeatureTable> {
    let kinds = union_kinds(combos);
    let mut recordings = read_index(cache_dir)?;
    recordings.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
    if recordings.is_empty() {
        return Err(Error::EmptyInput("cache index"));
    }
    let split_file = split_path(cfg);
    let split = parse_split_csv(&std::fs::read_to_string(&split_file).map_err(|e| {
        Error::Config(format!("cannot read {split_file:?} (run split first): {e}"))
    })?)?;

    let mut refs: [Vec<SegmentRef>; 3] = Default::default();
    let mut maps: [Vec<Vec<FeatureMap>>; 3] = Default::default();
    let mut num_classes = 0;
    for rec in &recordings {
        let part = split.partition_of(&rec.recording_id).ok_or_else(|| {
            Error::Config(format!(
                "recording {:?} is missing from the split manifest; re-run split",
                rec.recording_id
            ))
        })?;
        num_classes = num_classes.max(rec.class_label + 1);
        for seg in 0..rec.segment_count {
            let mut per_kind = Vec::with_capacity(kinds.len());
            for &kind in &kinds {
                let path = cache_file(cache_dir, &rec.recording_id, seg, kind);
                let map = read_feature_map(&path)
                    .map_err(|e| Error::Format(format!("cache file {path:?}: {e}")))?;
                if map.kind != kind {
                    return Err(Error::Format(format!(
                        "cache file {path:?} holds {} data",
                        map.kind.name()
                    )));
                }
                per_kind.push(map);
            }
            refs[part.index()].push(SegmentRef {
                recording_id: rec.recording_id.clone(),
                class_label: rec.class_label,
                segment_index: seg,
            });
            maps[part.index()].push(per_kind);
        }
    }
    for (part, r) in Partition::ALL.into_iter().zip(&refs) {
        if r.is_empty() {
            return Err(Error::EmptyInput(match part {
                Partition::Train => "train partition",
                Partition::Val => "val partition",
                Partition::Test => "test partition",
            }));
        }
    }

    // Z-score every map with statistics taken from the training split only.
    let mut stats: BTreeMap<FeatureKind, FeatureStats> = BTreeMap::new();
    for (pos, &kind) in kinds.iter().enumerate() {
        let mut acc = StatsAccumulator::default();
        for seg_maps in &maps[Partition::Train.index()] {
            acc.add_map(&seg_maps[pos]);
        }
        stats.insert(kind, acc.finalize()?);
    }
    for part_maps in &mut maps {
        for seg_maps in part_maps {
            for (pos, &kind) in kinds.iter().enumerate() {
                seg_maps[pos] = normalize(&seg_maps[pos], &stats[&kind]);
            }
        }
    }

    Ok(FeatureTable { num_classes, kinds, refs, maps })
}

pub(super) struct ComboDataset {
    pub(super) train: Vec<Sample>,
    pub(super) val: Vec<Sample>,
    pub(super) test: Vec<Sample>,
    /// `recording_id#segment_index` per test sample.
    pub(super) test_segments: Vec<String>,
}

impl FeatureTable {
    fn partition_samples(&self, part: Partition, combo: CombinationId) -> Result<Vec<Sample>> {
        let wanted = combo.kinds();
        let slots: Vec<usize> = wanted
            .iter()
            .map(|k| {
                self.kinds
                    .iter()
                    .position(|t| t == k)
                    .ok_or_else(|| Error::Selection(format!("kind {} not loaded", k.name())))
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(self.refs[part.index()].len());
        for (r, seg_maps) in self.refs[part.index()].iter().zip(&self.maps[part.index()]) {
            let selected: Vec<FeatureMap> =
                slots.iter().map(|&pos| seg_maps[pos].clone()).collect();
            let stacked = stack(&selected, combo)?;
            out.push(Sample::from_stack(&stacked, r.class_label)?);
        }
        Ok(out)
    }

    pub(super) fn combo_dataset(&self, combo: CombinationId) -> Result<ComboDataset> {
        Ok(ComboDataset {
            train: self.partition_samples(Partition::Train, combo)?,
            val: self.partition_samples(Partition::Val, combo)?,
            test: self.partition_samples(Partition::Test, combo)?,
            test_segments: self.refs[Partition::Test.index()]
                .iter()
                .map(|r| format!("{}#{}", r.recording_id, r.segment_index))
                .collect(),
        })
    }
}

fn run_config_text(cfg: &RunConfig, model: &ModelConfig, combo: CombinationId, seed: u64) -> String {
    let chans: Vec<String> = model.conv_channels.iter().map(|c| c.to_string()).collect();
    format!(
        "combo = {}\nseed = {}\nsplit_seed = {}\nwindow = {}\nhop = {}\n\
         in_channels = {}\nnum_classes = {}\nconv_channels = {}\nbranch_channels = {}\n\
         bins = {}\nlr = {}\nbatch = {}\nmax_epochs = {}\npatience = {}\ndropout = {}\n",
        combo.name(),
        seed,
        cfg.split_seed,
        cfg.frame.window_len,
        cfg.frame.hop_len,
        model.in_channels,
        model.num_classes,
        chans.join(","),
        model.branch_channels,
        model.bins,
        cfg.train.lr,
        cfg.train.batch,
        cfg.train.max_epochs,
        cfg.train.patience,
        cfg.train.dropout,
    )
}

fn history_csv(history: &[crate::hltdnn::EpochStats]) -> String {
    let mut text = String::from(HISTORY_HEADER);
    text.push('\n');
    for row in history {
        text.push_str(&format!("{},{},{}\n", row.epoch, row.train_loss, row.val_loss));
    }
    text
}

fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Ok(existing) = std::fs::read(path) {
        if existing == bytes {
            return Ok(());
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub(super) fn model_config_for(combo: CombinationId, num_classes: usize, seed: u64) -> ModelConfig {
    let mut mc = ModelConfig::paper(combo.kinds().len(), seed);
    mc.num_classes = num_classes;
    mc
}

/// Evaluate a trained model on the test set and build its persisted record.
fn build_eval(
    model: &ModelState<f32>,
    dataset: &ComboDataset,
    combo: CombinationId,
    seed: u64,
    num_classes: usize,
    best_epoch: usize,
    stopped_early: bool,
) -> Result<RunEval> {
    let result = evaluate(model, &dataset.test)?;
    let labels: Vec<usize> = dataset.test.iter().map(|s| s.label).collect();
    let mut feats = Vec::with_capacity(dataset.test.len());
    for s in &dataset.test {
        let p = penultimate(model, &s.x)?;
        feats.push(p.into_iter().map(|v| v as f64).collect::<Vec<f64>>());
    }
    let fdr = match crate::metrics::log_fdr(&feats, &labels) {
        Ok(v) => Some(v),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RunEval {
        combo: combo.name(),
        seed,
        num_classes,
        best_epoch,
        stopped_early,
        test_loss: result.mean_loss,
        test_accuracy: result.accuracy,
        log_fdr: fdr,
        segments: dataset.test_segments.clone(),
        labels,
        predictions: result.predictions,
    })
}

pub(super) fn read_eval(path: &Path) -> Result<RunEval> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("eval.json: {e}")))
}

fn write_eval(path: &Path, eval: &RunEval) -> Result<()> {
    let mut text = serde_json::to_string_pretty(eval)
        .map_err(|e| Error::Format(format!("eval.json: {e}")))?;
    text.push('\n');
    write_if_changed(path, text.as_bytes())
}

/// Train or resume one (combo, seed) run. The checkpoint on disk is the
/// resume marker: when present the run is never retrained, only its missing
/// artifacts are regenerated.
fn execute_run(
    cfg: &RunConfig,
    dataset: &ComboDataset,
    combo: CombinationId,
    seed: u64,
    num_classes: usize,
) -> Result<(RunStatus, Option<RunEval>)> {
    let dir = run_dir(cfg, combo, seed);
    std::fs::create_dir_all(&dir)?;
    let mc = model_config_for(combo, num_classes, seed);
    write_if_changed(&dir.join("config"), run_config_text(cfg, &mc, combo, seed).as_bytes())?;

    let ckpt = dir.join("checkpoint.best");
    let eval_path = dir.join("eval.json");
    if ckpt.is_file() {
        let mut model = build_model(&mc)?;
        load_checkpoint(&ckpt, &mut model, None)?;
        let eval = match read_eval(&eval_path) {
            Ok(eval) => eval,
            Err(_) => {
                let (best_epoch, stopped_early) = history_summary(&dir, cfg.train.max_epochs)?;
                let eval = build_eval(
                    &model, dataset, combo, seed, num_classes, best_epoch, stopped_early,
                )?;
                write_eval(&eval_path, &eval)?;
                eval
            }
        };
        return Ok((RunStatus::Resumed, Some(eval)));
    }

    let mut tc = cfg.train.clone();
    tc.seed = seed;
    let model = build_model(&mc)?;
    let outcome = match train(model, &dataset.train, &dataset.val, &tc) {
        Ok(outcome) => outcome,
        Err(Error::Divergence { epoch }) => {
            std::fs::write(dir.join("diverged.txt"), format!("diverged at epoch {epoch}\n"))?;
            return Ok((RunStatus::Diverged { epoch }, None));
        }
        Err(e) => return Err(e),
    };
    write_if_changed(&dir.join("history.csv"), history_csv(&outcome.history).as_bytes())?;
    save_checkpoint(&ckpt, &outcome.model, Some(&outcome.acc))?;
    let eval = build_eval(
        &outcome.model,
        dataset,
        combo,
        seed,
        num_classes,
        outcome.best_epoch,
        outcome.stopped_early,
    )?;
    write_eval(&eval_path, &eval)?;
    let stale = dir.join("diverged.txt");
    if stale.exists() {
        std::fs::remove_file(&stale)?;
    }
    Ok((RunStatus::Trained, Some(eval)))
}

/// Recover (best_epoch, stopped_early) from history.csv when eval.json is
/// missing on resume.
fn history_summary(dir: &Path, max_epochs: usize) -> Result<(usize, bool)> {
    let text = std::fs::read_to_string(dir.join("history.csv"))?;
    let mut best_epoch = 0;
    let mut best = f64::INFINITY;
    let mut last_epoch = 0;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != HISTORY_HEADER {
                return Err(Error::Format(format!("history header mismatch: {line:?}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!("history line {}: expected 3 fields", i + 1)));
        }
        let epoch: usize = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("history line {}: bad epoch", i + 1)))?;
        let val: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Format(format!("history line {}: bad val loss", i + 1)))?;
        if val < best {
            best = val;
            best_epoch = epoch;
        }
        last_epoch = epoch;
    }
    if last_epoch == 0 {
        return Err(Error::Format("history.csv has no epochs".into()));
    }
    Ok((best_epoch, last_epoch < max_epochs))
}

struct RunAll {
    trained: usize,
    resumed: usize,
    diverged: Vec<(String, u64, usize)>,
    statuses: Vec<(String, u64, RunStatus)>,
}

fn run_all(cfg: &RunConfig, cache_dir: &Path) -> Result<RunAll> {
    let combos = cfg.combos.resolve()?;
    let table = load_table(cfg, cache_dir, &combos)?;
    let mut out = RunAll { trained: 0, resumed: 0, diverged: Vec::new(), statuses: Vec::new() };
    for &combo in &combos {
        let dataset = table.combo_dataset(combo)?;
        let queue: Mutex<Vec<u64>> = Mutex::new(cfg.seeds.iter().rev().copied().collect());
        let results: Mutex<Vec<(u64, Result<(RunStatus, Option<RunEval>)>)>> =
            Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..cfg.workers.min(cfg.seeds.len()) {
                scope.spawn(|| loop {
                    let seed = match queue.lock().unwrap().pop() {
                        Some(seed) => seed,
                        None => break,
                    };
                    let res = execute_run(cfg, &dataset, combo, seed, table.num_classes);
                    results.lock().unwrap().push((seed, res));
                });
            }
        });
        let mut results = results.into_inner().unwrap();
        results.sort_by_key(|(seed, _)| *seed);
        for (seed, res) in results {
            let (status, _) = res?;
            match status {
                RunStatus::Trained => out.trained += 1,
                RunStatus::Resumed => out.resumed += 1,
                RunStatus::Diverged { epoch } => {
                    out.diverged.push((combo.name(), seed, epoch));
                }
            }
            out.statuses.push((combo.name(), seed, status));
        }
    }
    Ok(out)
}

/// Train every configured (combo, seed) pair without generating the report.
pub fn cmd_train(cfg: &RunConfig, cache_dir: &Path) -> Result<Vec<(String, u64, RunStatus)>> {
    Ok(run_all(cfg, cache_dir)?.statuses)
}

/// Full sweep: train all pairs, then write the combined report.
pub fn cmd_sweep(cfg: &RunConfig, cache_dir: &Path) -> Result<SweepOutcome> {
    let runs = run_all(cfg, cache_dir)?;
    let report = cmd_report(cfg, cache_dir)?;
    Ok(SweepOutcome {
        trained: runs.trained,
        resumed: runs.resumed,
        diverged: runs.diverged,
        report,
    })
}

/// Re-evaluate every configured run from its checkpoint, refreshing
/// eval.json. Pairs without a checkpoint are reported as missing.
pub fn cmd_evaluate(cfg: &RunConfig, cache_dir: &Path) -> Result<EvaluateOutcome> {
    let combos = cfg.combos.resolve()?;
    let table = load_table(cfg, cache_dir, &combos)?;
    let mut out = EvaluateOutcome { evaluated: Vec::new(), missing: Vec::new() };
    for &combo in &combos {
        let mut dataset: Option<ComboDataset> = None;
        for &seed in &cfg.seeds {
            let dir = run_dir(cfg, combo, seed);
            let ckpt = dir.join("checkpoint.best");
            if !ckpt.is_file() {
                out.missing.push((combo.name(), seed));
                continue;
            }
            let dataset = match &dataset {
                Some(d) => d,
                None => {
                    dataset = Some(table.combo_dataset(combo)?);
                    dataset.as_ref().unwrap()
                }
            };
            let mc = model_config_for(combo, table.num_classes, seed);
            let mut model = build_model(&mc)?;
            load_checkpoint(&ckpt, &mut model, None)?;
            let (best_epoch, stopped_early) = history_summary(&dir, cfg.train.max_epochs)?;
            let eval = build_eval(
                &model, dataset, combo, seed, table.num_classes, best_epoch, stopped_early,
            )?;
            write_eval(&dir.join("eval.json"), &eval)?;
            out.evaluated.push(eval);
        }
    }
    Ok(out)
}
