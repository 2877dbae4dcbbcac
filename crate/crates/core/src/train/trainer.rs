use ndarray::Array2;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::metrics::{evaluate, Metric};
use super::split::Split;
use crate::autodiff::{ParamStore, Tape};
use crate::error::{Error, Result};
use crate::graph::Labels;
use crate::model::{Mode, NodeClassifier};

/// Optimizer and stopping settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without a strict validation improvement before stopping.
    pub patience: usize,
    pub metric: Metric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            weight_decay: 5e-4,
            max_epochs: 500,
            patience: 100,
            metric: Metric::Accuracy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training loss of the parameters the epoch started from.
    pub train_loss: f64,
    /// Validation score of the parameters the epoch ended with.
    pub val_score: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub best_val: f64,
    pub test_score: f64,
    pub best_params: ParamStore,
    pub history: Vec<EpochRecord>,
}

/// Class probabilities of every node in evaluation mode.
pub fn predict<M: NodeClassifier + ?Sized>(model: &M, store: &ParamStore) -> Result<Array2<f64>> {
    // Evaluation never draws from the generator.
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let mut tape = Tape::new();
    let probs = model.forward(&mut tape, store, Mode::Eval, &mut unused)?;
    Ok(tape.value(probs).clone())
}

/// Scores `nodes` under the given parameters.
pub fn score<M: NodeClassifier + ?Sized>(
    model: &M,
    store: &ParamStore,
    labels: &Labels,
    nodes: &[usize],
    metric: Metric,
) -> Result<f64> {
    evaluate(metric, &predict(model, store)?, labels, nodes)
}

/// Full-batch training with best-validation checkpointing.
pub fn train<M: NodeClassifier + ?Sized>(
    model: &M,
    store: &mut ParamStore,
    labels: &Labels,
    split: &Split,
    cfg: &TrainConfig,
    dropout_rng: &mut dyn RngCore,
) -> Result<TrainOutcome> {
    train_observed(model, store, labels, split, cfg, dropout_rng, |_, _| {})
}

/// [`train`], calling `observer` with the record and parameters after
/// every epoch.
pub fn train_observed<M, F>(
    model: &M,
    store: &mut ParamStore,
    labels: &Labels,
    split: &Split,
    cfg: &TrainConfig,
    dropout_rng: &mut dyn RngCore,
    mut observer: F,
) -> Result<TrainOutcome>
where
    M: NodeClassifier + ?Sized,
    F: FnMut(&EpochRecord, &ParamStore),
{
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    if labels.len() != model.node_count() {
        return Err(Error::shape(
            "train",
            format!("{} labels for {} nodes", labels.len(), model.node_count()),
        ));
    }
    let train_labels: Vec<usize> = split.train.iter().map(|&v| labels.get(v)).collect();
    let mut adam = AdamState::new(store);
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, ParamStore)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let mut tape = Tape::new();
        let probs = model.forward(&mut tape, store, Mode::Train, dropout_rng)?;
        let loss = tape.cross_entropy_mean(probs, &split.train, &train_labels)?;
        let train_loss = tape.value(loss)[[0, 0]];
        tape.backward(loss, store)?;
        drop(tape);
        adam_step(store, &mut adam, cfg.lr, cfg.weight_decay);

        let val_score = score(model, store, labels, &split.val, cfg.metric)?;
        let record = EpochRecord { epoch, train_loss, val_score };
        history.push(record);
        observer(&record, store);

        let improved = best.as_ref().is_none_or(|(_, b, _)| val_score > *b);
        if improved {
            best = Some((epoch, val_score, store.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= cfg.patience {
            break;
        }
    }

    let (best_epoch, best_val, best_params) = best.expect("at least one epoch ran");
    let test_score = score(model, &best_params, labels, &split.test, cfg.metric)?;
    Ok(TrainOutcome { best_epoch, best_val, test_score, best_params, history })
}
