//! End-to-end pipeline smoke test over a tiny synthetic corpus: extract,
//! split, sweep, resume, evaluate, report regeneration.

use std::path::Path;

use sonoscope::harness::{
    cmd_evaluate, cmd_extract, cmd_report, cmd_split, cmd_sweep, parse_config, RunConfig,
    HISTORY_HEADER, SUMMARY_HEADER,
};
use sonoscope::synth::{generate_corpus, CorpusKind, SynthConfig};

fn pipeline_config(root: &Path) -> RunConfig {
    let text = "\
[corpus]
manifest = corpus/manifest.csv
output_dir = out

[train]
lr = 0.002
batch = 8
max_epochs = 3
patience = 2

[sweep]
seeds = 0, 1
combos = MS, MS+MFCC
";
    let mut cfg = parse_config(text).unwrap();
    cfg.manifest = root.join("corpus/manifest.csv");
    cfg.output_dir = root.join("out");
    cfg
}

#[test]
fn full_pipeline_runs_resumes_and_reports_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    generate_corpus(
        &tmp.path().join("corpus"),
        CorpusKind::Distinct,
        &SynthConfig { recordings_per_class: 4, segments_per_recording: 1, seed: 5 },
    )
    .unwrap();
    let cfg = pipeline_config(tmp.path());
    let cache = cfg.cache_dir(None);

    let stats = cmd_extract(&cfg, &cache).unwrap();
    assert_eq!(stats.recordings, 16);
    assert_eq!(stats.written, 16 * 6);
    assert!(stats.failures.is_empty());
    cmd_split(&cfg, &cache).unwrap();

    let outcome = cmd_sweep(&cfg, &cache).unwrap();
    assert_eq!(outcome.trained, 4);
    assert_eq!(outcome.resumed, 0);
    assert!(outcome.diverged.is_empty());
    assert_eq!(outcome.report.rows.len(), 2);
    assert!(outcome.report.missing.is_empty());

    for combo in ["MS", "MS+MFCC"] {
        for seed in ["0", "1"] {
            let dir = cfg.output_dir.join("runs").join(combo).join(seed);
            for file in ["config", "checkpoint.best", "history.csv", "eval.json"] {
                assert!(dir.join(file).is_file(), "missing {combo}/{seed}/{file}");
            }
            let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
            assert!(history.starts_with(HISTORY_HEADER));
            assert!(history.lines().count() >= 2);
        }
    }

    let report_dir = &outcome.report.report_dir;
    let summary = std::fs::read_to_string(report_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with(SUMMARY_HEADER));
    assert_eq!(summary.lines().count(), 3);
    for name in ["report.json", "fdr.csv", "penultimate.csv"] {
        assert!(report_dir.join(name).is_file(), "missing report/{name}");
    }
    for combo in ["MS", "MS+MFCC"] {
        assert!(report_dir.join("confusion").join(format!("{combo}.counts.csv")).is_file());
        assert!(report_dir.join("confusion").join(format!("{combo}.rownorm.csv")).is_file());
    }
    // Sorted by mean accuracy descending.
    let rows = &outcome.report.rows;
    assert!(rows[0].aggregate.accuracy.mean >= rows[1].aggregate.accuracy.mean);

    // Resume: nothing retrains, artifacts stay byte-identical.
    let snapshot: Vec<(String, Vec<u8>)> = [
        "report/summary.csv",
        "report/report.json",
        "report/fdr.csv",
        "report/penultimate.csv",
        "report/confusion/MS+MFCC.counts.csv",
        "runs/MS/0/eval.json",
        "runs/MS/0/checkpoint.best",
    ]
    .iter()
    .map(|rel| (rel.to_string(), std::fs::read(cfg.output_dir.join(rel)).unwrap()))
    .collect();

    let resumed = cmd_sweep(&cfg, &cache).unwrap();
    assert_eq!(resumed.trained, 0);
    assert_eq!(resumed.resumed, 4);
    for (rel, bytes) in &snapshot {
        assert_eq!(&std::fs::read(cfg.output_dir.join(rel)).unwrap(), bytes, "{rel} changed");
    }

    // Evaluate from checkpoints reproduces the persisted evals.
    let eval = cmd_evaluate(&cfg, &cache).unwrap();
    assert_eq!(eval.evaluated.len(), 4);
    assert!(eval.missing.is_empty());
    for (rel, bytes) in &snapshot {
        assert_eq!(&std::fs::read(cfg.output_dir.join(rel)).unwrap(), bytes, "{rel} changed");
    }

    // Report regeneration alone is also byte-identical.
    cmd_report(&cfg, &cache).unwrap();
    for (rel, bytes) in &snapshot {
        assert_eq!(&std::fs::read(cfg.output_dir.join(rel)).unwrap(), bytes, "{rel} changed");
    }

    // Dropping one run directory surfaces as an incomplete (not missing) combo.
    std::fs::remove_dir_all(cfg.output_dir.join("runs/MS/1")).unwrap();
    let partial = cmd_report(&cfg, &cache).unwrap();
    assert!(partial.missing.is_empty());
    let ms_row = partial.rows.iter().find(|r| r.combo == "MS").unwrap();
    assert!(ms_row.incomplete);
    assert_eq!(ms_row.aggregate.runs, 1);

    // Dropping the whole combo marks it missing.
    std::fs::remove_dir_all(cfg.output_dir.join("runs/MS")).unwrap();
    let missing = cmd_report(&cfg, &cache).unwrap();
    assert_eq!(missing.missing, vec!["MS".to_string()]);
    assert_eq!(missing.rows.len(), 1);
}

#[test]
fn interrupted_run_without_eval_is_not_retrained() {
    let tmp = tempfile::tempdir().unwrap();
    generate_corpus(
        &tmp.path().join("corpus"),
        CorpusKind::Distinct,
        &SynthConfig { recordings_per_class: 4, segments_per_recording: 1, seed: 6 },
    )
    .unwrap();
    let mut cfg = pipeline_config(tmp.path());
    cfg.seeds = vec![0];
    cfg.combos = sonoscope::harness::ComboSelection::parse("MFCC").unwrap();
    let cache = cfg.cache_dir(None);
    cmd_extract(&cfg, &cache).unwrap();
    cmd_split(&cfg, &cache).unwrap();

    let first = cmd_sweep(&cfg, &cache).unwrap();
    assert_eq!(first.trained, 1);
    let run = cfg.output_dir.join("runs/MFCC/0");
    let eval_bytes = std::fs::read(run.join("eval.json")).unwrap();
    let ckpt_bytes = std::fs::read(run.join("checkpoint.best")).unwrap();

    // Simulate an interruption between checkpointing and evaluation.
    std::fs::remove_file(run.join("eval.json")).unwrap();
    let second = cmd_sweep(&cfg, &cache).unwrap();
    assert_eq!(second.trained, 0);
    assert_eq!(second.resumed, 1);
    assert_eq!(std::fs::read(run.join("eval.json")).unwrap(), eval_bytes);
    assert_eq!(std::fs::read(run.join("checkpoint.best")).unwrap(), ckpt_bytes);
}
