use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto the failure modes of
/// the pipeline stages (ingest, feature extraction, stacking, training,
/// evaluation, orchestration).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (bad header, bad field, bad encoding of a value).
    #[error("format error: {0}")]
    Format(String),

    /// Structurally valid input using an encoding we do not handle.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An operation that requires data received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A class does not have enough recordings to populate all partitions.
    #[error("class {class} has {count} recordings; at least {min} required")]
    InsufficientData { class: usize, count: usize, min: usize },

    /// Signal shorter than one analysis window.
    #[error("input of {len} samples is shorter than window of {window}")]
    TooShort { len: usize, window: usize },

    /// A frequency or index range is invalid.
    #[error("range error: {0}")]
    Range(String),

    /// Padding target smaller than the source grid.
    #[error("size error: {0}")]
    Size(String),

    /// Feature selection does not match the requested combination.
    #[error("selection error: {0}")]
    Selection(String),

    /// Tensor shapes are inconsistent with the operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    /// A class label outside [0, num_classes).
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    /// Metrics requested on an empty confusion matrix.
    #[error("empty confusion matrix")]
    EmptyMatrix,

    /// Degenerate input for a separability score.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
