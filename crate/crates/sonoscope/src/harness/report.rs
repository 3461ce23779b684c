//! Report generation over completed run directories.
//!
//! Reads each run's `eval.json`, aggregates per combo, and writes under
//! `<output_dir>/report/`:
//!
//! ```text
//! summary.csv            one row per combo, sorted by mean accuracy desc
//! report.json            per-seed metrics, aggregates, confusion counts
//! fdr.csv                log-FDR of the penultimate features, per run
//! confusion/<combo>.counts.csv     summed over seeds
//! confusion/<combo>.rownorm.csv
//! penultimate.csv        test-set penultimate features of the best run
//! ```
//!
//! Everything is regenerated from scratch on each invocation and the output
//! is byte-identical across invocations.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feature_stack::CombinationId;
use crate::hltdnn::{build_model, load_checkpoint, penultimate};
use crate::metrics::{aggregate, summary, AggregateReport, ConfusionMatrix, MetricsReport};

use super::config::RunConfig;
use super::sweep::{load_table, model_config_for, read_eval, run_dir, RunEval};

pub const SUMMARY_HEADER: &str = "combo,runs,accuracy_mean,accuracy_std,precision_mean,\
precision_std,recall_mean,recall_std,f1_mean,f1_std,mcc_mean,mcc_std";

#[derive(Debug, Clone)]
pub struct ComboRow {
    pub combo: String,
    pub aggregate: AggregateReport,
    /// True when some configured seeds produced no completed run.
    pub incomplete: bool,
}

#[derive(Debug)]
pub struct ReportOutcome {
    /// Sorted by mean accuracy descending, combo name ascending on ties.
    pub rows: Vec<ComboRow>,
    /// Combos with no completed run at all.
    pub missing: Vec<String>,
    pub report_dir: PathBuf,
}

#[derive(Serialize)]
struct MeanStdJson {
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct AggregateJson {
    runs: usize,
    accuracy: MeanStdJson,
    precision: MeanStdJson,
    recall: MeanStdJson,
    f1: MeanStdJson,
    mcc: MeanStdJson,
}

#[derive(Serialize)]
struct RunJson {
    seed: u64,
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    mcc: f64,
    log_fdr: Option<f64>,
    best_epoch: usize,
    stopped_early: bool,
    test_loss: f64,
    confusion: Vec<Vec<u64>>,
}

#[derive(Serialize)]
struct ComboJson {
    combo: String,
    incomplete: bool,
    aggregate: AggregateJson,
    runs: Vec<RunJson>,
}

#[derive(Serialize)]
struct ReportJson {
    combos: Vec<ComboJson>,
    missing: Vec<String>,
}

fn mean_std_json(ms: crate::metrics::MeanStd) -> MeanStdJson {
    MeanStdJson { mean: ms.mean, std: ms.std }
}

struct ComboData {
    combo: CombinationId,
    evals: Vec<RunEval>,
    reports: Vec<MetricsReport>,
    matrices: Vec<ConfusionMatrix>,
    incomplete: bool,
}

fn confusion_rows(cm: &ConfusionMatrix) -> Vec<Vec<u64>> {
    let k = cm.classes();
    (0..k).map(|i| (0..k).map(|j| cm.count(i, j)).collect()).collect()
}

/// Sum confusion counts across seeds. All matrices share `k` because every
/// eval of a combo records the same class count.
fn summed_confusion(matrices: &[ConfusionMatrix]) -> Result<ConfusionMatrix> {
    let k = matrices[0].classes();
    let mut counts = vec![0u64; k * k];
    for cm in matrices {
        if cm.classes() != k {
            return Err(Error::Shape(format!(
                "confusion class counts differ: {} vs {k}",
                cm.classes()
            )));
        }
        for (slot, c) in counts.iter_mut().zip(cm.counts()) {
            *slot += c;
        }
    }
    ConfusionMatrix::from_counts(k, counts)
}

fn confusion_counts_csv(cm: &ConfusionMatrix) -> String {
    let k = cm.classes();
    let mut text = String::from("true");
    for j in 0..k {
        text.push_str(&format!(",pred_{j}"));
    }
    text.push('\n');
    for i in 0..k {
        text.push_str(&i.to_string());
        for j in 0..k {
            text.push_str(&format!(",{}", cm.count(i, j)));
        }
        text.push('\n');
    }
    text
}

fn confusion_rownorm_csv(cm: &ConfusionMatrix) -> String {
    let k = cm.classes();
    let norm = cm.row_normalized();
    let mut text = String::from("true");
    for j in 0..k {
        text.push_str(&format!(",pred_{j}"));
    }
    text.push('\n');
    for i in 0..k {
        text.push_str(&i.to_string());
        for j in 0..k {
            text.push_str(&format!(",{}", norm[i * k + j]));
        }
        text.push('\n');
    }
    text
}

/// Dump the penultimate features of every test segment for one run.
fn penultimate_csv(
    cfg: &RunConfig,
    cache_dir: &Path,
    combo: CombinationId,
    seed: u64,
    num_classes: usize,
) -> Result<String> {
    let table = load_table(cfg, cache_dir, &[combo])?;
    let dataset = table.combo_dataset(combo)?;
    let mc = model_config_for(combo, num_classes, seed);
    let mut model = build_model(&mc)?;
    load_checkpoint(&run_dir(cfg, combo, seed).join("checkpoint.best"), &mut model, None)?;

    let width = mc.penultimate_width();
    let mut text = String::from("label");
    for i in 0..width {
        text.push_str(&format!(",f{i}"));
    }
    text.push('\n');
    for s in &dataset.test {
        let feats = penultimate(&model, &s.x)?;
        text.push_str(&s.label.to_string());
        for v in feats {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    Ok(text)
}

/// Best run of a combo: max test accuracy, ties to the lower seed.
fn best_seed(evals: &[RunEval]) -> &RunEval {
    let mut best = &evals[0];
    for e in &evals[1..] {
        if e.test_accuracy > best.test_accuracy
            || (e.test_accuracy == best.test_accuracy && e.seed < best.seed)
        {
            best = e;
        }
    }
    best
}

/// Build all report artifacts from the run directories.
pub fn cmd_report(cfg: &RunConfig, cache_dir: &Path) -> Result<ReportOutcome> {
    let combos = cfg.combos.resolve()?;
    let mut data: Vec<ComboData> = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    for &combo in &combos {
        let mut evals = Vec::new();
        for &seed in &cfg.seeds {
            let path = run_dir(cfg, combo, seed).join("eval.json");
            if path.is_file() {
                evals.push(read_eval(&path)?);
            }
        }
        if evals.is_empty() {
            missing.push(combo.name());
            continue;
        }
        let mut reports = Vec::new();
        let mut matrices = Vec::new();
        for e in &evals {
            let cm = ConfusionMatrix::from_labels(&e.labels, &e.predictions, e.num_classes)?;
            reports.push(summary(&cm)?);
            matrices.push(cm);
        }
        let incomplete = evals.len() < cfg.seeds.len();
        data.push(ComboData { combo, evals, reports, matrices, incomplete });
    }

    let mut rows: Vec<(usize, ComboRow)> = data
        .iter()
        .enumerate()
        .map(|(i, d)| {
            Ok((
                i,
                ComboRow {
                    combo: d.combo.name(),
                    aggregate: aggregate(&d.reports)?,
                    incomplete: d.incomplete,
                },
            ))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|(_, a), (_, b)| {
        b.aggregate
            .accuracy
            .mean
            .partial_cmp(&a.aggregate.accuracy.mean)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.combo.cmp(&b.combo))
    });

    let report_dir = cfg.output_dir.join("report");
    let confusion_dir = report_dir.join("confusion");
    if confusion_dir.exists() {
        std::fs::remove_dir_all(&confusion_dir)?;
    }
    std::fs::create_dir_all(&confusion_dir)?;

    let mut summary_csv = String::from(SUMMARY_HEADER);
    summary_csv.push('\n');
    for (_, row) in &rows {
        let a = &row.aggregate;
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.combo,
            a.runs,
            a.accuracy.mean,
            a.accuracy.std,
            a.precision.mean,
            a.precision.std,
            a.recall.mean,
            a.recall.std,
            a.f1.mean,
            a.f1.std,
            a.mcc.mean,
            a.mcc.std,
        ));
    }
    std::fs::write(report_dir.join("summary.csv"), summary_csv)?;

    let mut combo_jsons = Vec::new();
    for (idx, row) in &rows {
        let d = &data[*idx];
        let agg = &row.aggregate;
        let runs = d
            .evals
            .iter()
            .zip(&d.reports)
            .zip(&d.matrices)
            .map(|((e, r), cm)| RunJson {
                seed: e.seed,
                accuracy: r.accuracy,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                mcc: r.mcc,
                log_fdr: e.log_fdr,
                best_epoch: e.best_epoch,
                stopped_early: e.stopped_early,
                test_loss: e.test_loss,
                confusion: confusion_rows(cm),
            })
            .collect();
        combo_jsons.push(ComboJson {
            combo: row.combo.clone(),
            incomplete: row.incomplete,
            aggregate: AggregateJson {
                runs: agg.runs,
                accuracy: mean_std_json(agg.accuracy),
                precision: mean_std_json(agg.precision),
                recall: mean_std_json(agg.recall),
                f1: mean_std_json(agg.f1),
                mcc: mean_std_json(agg.mcc),
            },
            runs,
        });
    }
    let report_json = ReportJson { combos: combo_jsons, missing: missing.clone() };
    let mut json_text = serde_json::to_string_pretty(&report_json)
        .map_err(|e| Error::Format(format!("report.json: {e}")))?;
    json_text.push('\n');
    std::fs::write(report_dir.join("report.json"), json_text)?;

    let mut fdr_csv = String::from("combo,seed,log_fdr\n");
    for d in &data {
        for e in &d.evals {
            match e.log_fdr {
                Some(v) => fdr_csv.push_str(&format!("{},{},{v}\n", e.combo, e.seed)),
                None => fdr_csv.push_str(&format!("{},{},\n", e.combo, e.seed)),
            }
        }
    }
    std::fs::write(report_dir.join("fdr.csv"), fdr_csv)?;

    for d in &data {
        let total = summed_confusion(&d.matrices)?;
        let base = d.combo.name();
        std::fs::write(
            confusion_dir.join(format!("{base}.counts.csv")),
            confusion_counts_csv(&total),
        )?;
        std::fs::write(
            confusion_dir.join(format!("{base}.rownorm.csv")),
            confusion_rownorm_csv(&total),
        )?;
    }

    if let Some((idx, top)) = rows.first() {
        let d = &data[*idx];
        let best = best_seed(&d.evals);
        let combo = CombinationId::parse(&top.combo)?;
        let csv = penultimate_csv(cfg, cache_dir, combo, best.seed, best.num_classes)?;
        std::fs::write(report_dir.join("penultimate.csv"), csv)?;
    } else if report_dir.join("penultimate.csv").exists() {
        std::fs::remove_file(report_dir.join("penultimate.csv"))?;
    }

    Ok(ReportOutcome { rows: rows.into_iter().map(|(_, r)| r).collect(), missing, report_dir })
}
