//! Command-line front end for the sonoscope pipeline.
//!
//! Exit codes: 0 on success, 1 on partial failure (unreadable recordings,
//! diverged runs, missing artifacts), 2 on invalid configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sonoscope::harness::{
    cmd_evaluate, cmd_extract, cmd_report, cmd_split, cmd_sweep, cmd_train, load_config,
    ComboRow, ComboSelection, RunConfig, RunStatus, CACHE_DIR_ENV,
};
use sonoscope::Error;

#[derive(Parser)]
#[command(name = "sonoscope", version, about = "Passive-sonar feature combination experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the configured combinations: "all" or e.g. "MFCC,MFCC+STFT".
    #[arg(long)]
    combos: Option<String>,
    /// Override the configured seeds, e.g. "0,1,2".
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract all feature kinds for every recording into the cache.
    Extract(Common),
    /// Assign recordings to train/val/test and write the split CSV.
    Split(Common),
    /// Train the configured (combo, seed) runs without writing the report.
    Train(Common),
    /// Train all configured runs and write the combined report.
    Sweep(Common),
    /// Re-evaluate existing checkpoints on the test split.
    Evaluate(Common),
    /// Regenerate report artifacts from completed runs.
    Report(Common),
}

impl Cmd {
    fn common(&self) -> &Common {
        match self {
            Cmd::Extract(c) | Cmd::Split(c) | Cmd::Train(c) | Cmd::Sweep(c) | Cmd::Evaluate(c)
            | Cmd::Report(c) => c,
        }
    }
}

fn parse_seeds(text: &str) -> sonoscope::Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("--seeds: bad seed {:?}", s.trim())))
        })
        .collect()
}

fn effective_config(common: &Common) -> sonoscope::Result<RunConfig> {
    let mut cfg = load_config(&common.config)?;
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(c) = &common.combos {
        cfg.combos = ComboSelection::parse(c)?;
    }
    if let Some(s) = &common.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn status_name(status: RunStatus) -> String {
    match status {
        RunStatus::Trained => "trained".into(),
        RunStatus::Resumed => "resumed".into(),
        RunStatus::Diverged { epoch } => format!("diverged at epoch {epoch}"),
    }
}

fn print_table(rows: &[ComboRow]) {
    println!(
        "{:<30} {:>4}  {:>15}  {:>15}  {:>15}  {:>15}  {:>19}",
        "combo", "runs", "accuracy %", "precision %", "recall %", "f1 %", "mcc"
    );
    for row in rows {
        let a = &row.aggregate;
        let mark = if row.incomplete { "*" } else { "" };
        println!(
            "{:<30} {:>4}  {:>6.2} \u{b1} {:<6.2}  {:>6.2} \u{b1} {:<6.2}  {:>6.2} \u{b1} {:<6.2}  {:>6.2} \u{b1} {:<6.2}  {:>7.4} \u{b1} {:<7.4}",
            format!("{}{mark}", row.combo),
            a.runs,
            a.accuracy.mean * 100.0,
            a.accuracy.std * 100.0,
            a.precision.mean * 100.0,
            a.precision.std * 100.0,
            a.recall.mean * 100.0,
            a.recall.std * 100.0,
            a.f1.mean * 100.0,
            a.f1.std * 100.0,
            a.mcc.mean,
            a.mcc.std,
        );
    }
    if rows.iter().any(|r| r.incomplete) {
        println!("* incomplete: some seeds have no completed run");
    }
}

fn run(cli: Cli) -> sonoscope::Result<ExitCode> {
    let cfg = effective_config(cli.command.common())?;
    let env = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from);
    let cache = cfg.cache_dir(env.as_deref());

    match &cli.command {
        Cmd::Extract(_) => {
            let stats = cmd_extract(&cfg, &cache)?;
            println!(
                "extracted {} recordings into {}: {} files written, {} unchanged",
                stats.recordings,
                cache.display(),
                stats.written,
                stats.skipped
            );
            for (id, msg) in &stats.failures {
                eprintln!("failed: {id}: {msg}");
            }
            if stats.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} recording(s) failed", stats.failures.len());
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Split(_) => {
            let split = cmd_split(&cfg, &cache)?;
            let [train, val, test] = split.achieved_ratios;
            println!(
                "split {} recordings (seed {}): train {:.3}, val {:.3}, test {:.3}",
                split.assignments.len(),
                split.seed,
                train,
                val,
                test
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Train(_) => {
            let statuses = cmd_train(&cfg, &cache)?;
            let mut diverged = 0;
            for (combo, seed, status) in &statuses {
                println!("{combo} seed {seed}: {}", status_name(*status));
                if matches!(status, RunStatus::Diverged { .. }) {
                    diverged += 1;
                }
            }
            if diverged == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{diverged} run(s) diverged");
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Sweep(_) => {
            let outcome = cmd_sweep(&cfg, &cache)?;
            println!(
                "sweep complete: {} trained, {} resumed, {} diverged",
                outcome.trained,
                outcome.resumed,
                outcome.diverged.len()
            );
            for (combo, seed, epoch) in &outcome.diverged {
                eprintln!("diverged: {combo} seed {seed} at epoch {epoch}");
            }
            print_table(&outcome.report.rows);
            println!("report written to {}", outcome.report.report_dir.display());
            if outcome.diverged.is_empty() && outcome.report.missing.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Evaluate(_) => {
            let outcome = cmd_evaluate(&cfg, &cache)?;
            for eval in &outcome.evaluated {
                println!(
                    "{} seed {}: test accuracy {:.4}, test loss {:.4}",
                    eval.combo, eval.seed, eval.test_accuracy, eval.test_loss
                );
            }
            if outcome.missing.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for (combo, seed) in &outcome.missing {
                    eprintln!("missing checkpoint: {combo} seed {seed}");
                }
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Report(_) => {
            let outcome = cmd_report(&cfg, &cache)?;
            print_table(&outcome.rows);
            println!("report written to {}", outcome.report_dir.display());
            if outcome.missing.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for combo in &outcome.missing {
                    eprintln!("no completed runs for {combo}");
                }
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
