//! Experiment harness: config parsing, cache extraction, the combination
//! sweep, and report generation. The CLI binary is a thin wrapper over the
//! commands in this module.

mod config;
mod extract;
mod report;
mod sweep;

pub use config::{load_config, parse_config, ComboSelection, RunConfig};
pub use extract::{
    cache_file, cmd_extract, cmd_split, index_path, read_index, segment_dir, split_path,
    ExtractStats, ERROR_LOG, INDEX_HEADER, SEGMENT_SECONDS, TARGET_RATE_HZ,
};
pub use report::{cmd_report, ComboRow, ReportOutcome, SUMMARY_HEADER};
pub use sweep::{
    cmd_evaluate, cmd_sweep, cmd_train, run_dir, EvaluateOutcome, RunEval, RunStatus,
    SweepOutcome, HISTORY_HEADER,
};

/// Environment variable that overrides the cache directory.
pub const CACHE_DIR_ENV: &str = "SONOSCOPE_CACHE_DIR";
