//! The histogram-layer time-delay neural network: model assembly, training
//! protocol, and checkpointing.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{
    checkpoint_bytes, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{backward, forward, penultimate, predict, ModelConfig, ModelState, ParamSet, Trace};
pub use train::{
    evaluate, mean_loss, train, EarlyStopping, EpochStats, EvalResult, Sample, TrainConfig,
    TrainOutcome,
};

/// Spec name for seeded model construction in 32-bit training precision.
pub fn build_model(cfg: &ModelConfig) -> crate::error::Result<ModelState<f32>> {
    ModelState::init(cfg)
}
