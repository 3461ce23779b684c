//! Underwater-acoustic feature-combination pipeline.
//!
//! The crate covers the full workflow for studying how combinations of
//! time-frequency features affect a histogram-layer time-delay network:
//!
//! * [`signal_io`] — WAV ingest, band-limited resampling, fixed-length
//!   segmentation, and leakage-free recording-level dataset splits.
//! * [`tf_features`] — six feature extractors (mel spectrogram, MFCC,
//!   truncated STFT, gammatone cepstra, constant-Q and variable-Q
//!   transforms) plus a binary on-disk feature cache.
//! * [`feature_stack`] — subset enumeration, adaptive zero padding to a
//!   common grid, and channel stacking of arbitrary feature selections.
//! * [`nn_core`] — a small deterministic CPU tensor kernel set with
//!   hand-derived gradients (convolution, pooling, soft-histogram layer,
//!   dropout, cross-entropy, Adagrad).
//! * [`hltdnn`] — the two-branch classifier built from those kernels, its
//!   training loop with early stopping, and binary checkpoints.
//! * [`metrics`] — confusion matrices, weighted classification metrics,
//!   multiclass MCC, and a log Fisher discriminant ratio.
//! * [`harness`] — configuration files and the extract / split / train /
//!   sweep / evaluate / report commands used by the CLI.
//! * [`synth`] — a synthetic labeled tone corpus generator used by the
//!   integration tests and for desk-scale experiments.

pub mod error;
pub mod grid;

pub mod feature_stack;
pub mod harness;
pub mod hltdnn;
pub mod metrics;
pub mod nn_core;
mod seeding;
pub mod signal_io;
pub mod synth;
pub mod tf_features;

pub use error::{Error, Result};
pub use grid::Grid2;
