//! The §3 training protocol: Adagrad, batch 128, up to 150 epochs, early
//! stopping on validation loss with patience 15, dropout 0.5 before the
//! classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feature_stack::FeatureStack;
use crate::hltdnn::model::{backward, forward, ModelState, ParamSet};
use crate::nn_core::{softmax_cross_entropy, Tensor};
use crate::seeding::stream_seed;

const STREAM_SHUFFLE: u64 = 0x534855; // "SHU"
const STREAM_DROPOUT: u64 = 0x44524f; // "DRO"

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, batch: 128, max_epochs: 150, patience: 15, dropout: 0.5, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("learning rate {} invalid", self.lr)));
        }
        if self.batch == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch, max_epochs and patience must be positive".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// One labeled training example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Tensor<f32>,
    pub label: usize,
}

impl Sample {
    pub fn from_stack(stack: &FeatureStack, label: usize) -> Result<Sample> {
        let x = Tensor::from_vec(
            &[stack.n_channels(), stack.height, stack.width],
            stack.data.clone(),
        )?;
        Ok(Sample { x, label })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: ModelState<f32>,
    /// Adagrad accumulators matching the returned weights.
    pub acc: ParamSet<f32>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Early stopping on strictly lower validation loss; no minimum delta.
#[derive(Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, bad: 0 }
    }

    /// Feed one epoch's validation loss; returns (improved, should_stop).
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.bad = 0;
            (true, false)
        } else {
            self.bad += 1;
            (false, self.bad >= self.patience)
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

fn check_samples(model: &ModelState<f32>, set: &[Sample], what: &'static str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    let dims = set[0].x.dims().to_vec();
    for s in set {
        if s.x.dims() != dims {
            return Err(Error::Shape(format!(
                "{what}: mixed input shapes {:?} vs {dims:?}",
                s.x.dims()
            )));
        }
        if s.label >= model.cfg.num_classes {
            return Err(Error::Label { label: s.label, classes: model.cfg.num_classes });
        }
    }
    if dims[0] != model.cfg.in_channels {
        return Err(Error::Shape(format!(
            "{what}: stacks have {} channels, model expects {}",
            dims[0], model.cfg.in_channels
        )));
    }
    Ok(())
}

/// Mean cross-entropy over a set in inference mode.
pub fn mean_loss(model: &ModelState<f32>, set: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in set {
        let trace = forward(model, &s.x, None)?;
        let (loss, _) = softmax_cross_entropy(&trace.logits, s.label)?;
        total += loss as f64;
    }
    Ok(total / set.len() as f64)
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Inference over a set: mean loss, accuracy, and per-sample predictions.
pub fn evaluate(model: &ModelState<f32>, set: &[Sample]) -> Result<EvalResult> {
    if set.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut total = 0.0;
    let mut hits = 0usize;
    let mut predictions = Vec::with_capacity(set.len());
    for s in set {
        let trace = forward(model, &s.x, None)?;
        let (loss, _) = softmax_cross_entropy(&trace.logits, s.label)?;
        total += loss as f64;
        let logits = trace.logits.data();
        let mut best = 0;
        for (i, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = i;
            }
        }
        predictions.push(best);
        if best == s.label {
            hits += 1;
        }
    }
    Ok(EvalResult {
        mean_loss: total / set.len() as f64,
        accuracy: hits as f64 / set.len() as f64,
        predictions,
    })
}

/// Train to the best validation loss. Batches are a fresh seeded shuffle
/// each epoch with the final short batch kept; gradients are batch means;
/// non-finite losses abort with the offending epoch.
pub fn train(
    model: ModelState<f32>,
    train_set: &[Sample],
    val_set: &[Sample],
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    tc.validate()?;
    check_samples(&model, train_set, "training set")?;
    check_samples(&model, val_set, "validation set")?;

    let mut model = model;
    let mut acc = ParamSet::zeros_like(&model.params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(stream_seed(tc.seed, STREAM_SHUFFLE));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(stream_seed(tc.seed, STREAM_DROPOUT));

    let mut stopper = EarlyStopping::new(tc.patience);
    let mut history = Vec::new();
    let mut best_model = model.clone();
    let mut best_acc = acc.clone();
    let mut stopped_early = false;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=tc.max_epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, shuffle_rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(tc.batch) {
            let scale = 1.0 / batch.len() as f32;
            let mut grads = ParamSet::zeros_like(&model.params);
            let mut batch_loss = 0.0;
            for &idx in batch {
                let s = &train_set[idx];
                let trace =
                    forward(&model, &s.x, Some((tc.dropout, &mut dropout_rng)))?;
                let (loss, mut grad_logits) = softmax_cross_entropy(&trace.logits, s.label)?;
                batch_loss += loss as f64;
                for g in grad_logits.data_mut() {
                    *g *= scale;
                }
                grads.add_assign(&backward(&model, &trace, &grad_logits)?);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            epoch_loss += batch_loss;
            model.adagrad_update(&mut acc, &grads, tc.lr)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = mean_loss(&model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(EpochStats { epoch, train_loss, val_loss });
        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            best_model = model.clone();
            best_acc = acc.clone();
        }
        if stop {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        model: best_model,
        acc: best_acc,
        history,
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best_loss(),
        stopped_early,
    })
}
