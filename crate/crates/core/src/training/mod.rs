//! Weighted binary cross-entropy, Adam, reduce-on-plateau, and the epoch loop.

mod adam;
mod loss;
mod plateau;

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, OptimizerState, BETA1, BETA2, EPSILON};
pub use loss::{class_weights, weighted_bce, weighted_bce_node, ClassWeights, PROB_CLAMP};
pub use plateau::{reduce_lr_on_plateau, PlateauScheduler};

use crate::autodiff::{Array, Graph};
use crate::data::{Sample, NUM_CHANNELS};
use crate::error::{Error, Result};
use crate::nn::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub plateau_min_delta: f64,
    pub min_lr: f64,
    /// Loss multiplier for the personalized patient's samples during fine-tuning.
    pub sample_weight_boost: f64,
    /// Shuffle seed; set from the experiment seed rather than the config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.001,
            plateau_patience: 3,
            plateau_factor: 0.5,
            plateau_min_delta: 1e-4,
            min_lr: 1e-5,
            sample_weight_boost: 4.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let problems = [
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.learning_rate > 0.0, "learning_rate must be > 0"),
            (
                self.plateau_factor > 0.0 && self.plateau_factor < 1.0,
                "plateau_factor must be in (0, 1)",
            ),
            (self.plateau_patience >= 1, "plateau_patience must be >= 1"),
            (self.plateau_min_delta >= 0.0, "plateau_min_delta must be >= 0"),
            (self.min_lr > 0.0, "min_lr must be > 0"),
            (
                self.sample_weight_boost >= 1.0,
                "sample_weight_boost must be >= 1",
            ),
        ];
        match problems.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config(format!("train: {msg}"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub optimizer_steps: u64,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_accuracy,lr\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.4},{}",
                e.epoch, e.train_loss, e.val_loss, e.val_accuracy, e.lr
            );
        }
        s
    }
}

/// Emitted once per mini-batch, before the optimizer step.
pub struct BatchEvent<'a> {
    pub epoch: usize,
    pub batch_index: usize,
    pub samples: Vec<&'a Sample>,
}

/// Per-sample forward + backward: returns the weighted loss and one gradient
/// vector per model parameter, scaled by `scale`.
fn sample_gradient(model: &Model, sample: &Sample, weight: f64, scale: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut g = Graph::new();
    let rows = sample.window.len() / NUM_CHANNELS;
    let x = g.constant(Array::new(vec![rows, NUM_CHANNELS], sample.window.clone())?);
    let (out, params) = model.forward(&mut g, x, true)?;
    let loss = weighted_bce_node(&mut g, out, sample.label, weight)?;
    let value = g.value(loss)[0];
    let s = g.scalar(scale);
    let scaled = g.mul(loss, s)?;
    let mut grads = g.backward(scaled)?;
    let per_param = params
        .iter()
        .map(|&p| grads.take(p).unwrap_or_default())
        .collect();
    Ok((value, per_param))
}

/// Predicted probabilities for a set of samples, in input order.
pub fn predict_all(model: &Model, samples: &[&Sample]) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|s| model.predict(&s.window))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Unweighted mean BCE and accuracy (threshold 0.5, `p >= 0.5` → positive).
pub fn loss_and_accuracy(model: &Model, samples: &[&Sample]) -> Result<(f64, f64)> {
    let preds = predict_all(model, samples)?;
    let n = samples.len() as f64;
    let loss = preds
        .iter()
        .zip(samples)
        .map(|(&p, s)| weighted_bce(p, s.label, 1.0))
        .sum::<f64>()
        / n;
    let correct = preds
        .iter()
        .zip(samples)
        .filter(|(&p, s)| u8::from(p >= 0.5) == s.label)
        .count();
    Ok((loss, correct as f64 / n))
}

/// Mini-batch Adam training with class weights and optional per-sample
/// multipliers. The effective loss weight of a sample is
/// `class_weight(label) · sample_weight`; each batch minimizes the mean.
///
/// Per-sample gradients may be computed in parallel but are always summed in
/// batch order, so results do not depend on the thread count.
pub fn train(
    model: &mut Model,
    train_set: &[&Sample],
    val_set: &[&Sample],
    weights: ClassWeights,
    sample_weights: Option<&[f64]>,
    config: &TrainConfig,
    mut observer: Option<&mut dyn FnMut(&BatchEvent)>,
) -> Result<TrainHistory> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Contract(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if let Some(sw) = sample_weights {
        if sw.len() != train_set.len() {
            return Err(Error::Contract(format!(
                "{} sample weights for {} training samples",
                sw.len(),
                train_set.len()
            )));
        }
    }
    let train_keys: HashSet<_> = train_set.iter().map(|s| s.key()).collect();
    if let Some(dup) = val_set.iter().find(|s| train_keys.contains(&s.key())) {
        return Err(Error::Contract(format!(
            "validation sample {}@{} also appears in the training set",
            dup.patient_id, dup.window_start_ms
        )));
    }

    let mut state = OptimizerState::new(model.params());
    let mut scheduler = PlateauScheduler::new(config);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        let lr = scheduler.lr();
        order.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            if let Some(obs) = observer.as_deref_mut() {
                obs(&BatchEvent {
                    epoch,
                    batch_index,
                    samples: batch.iter().map(|&i| train_set[i]).collect(),
                });
            }
            let scale = 1.0 / batch.len() as f64;
            let snapshot: &Model = model;
            let results: Vec<Result<(f64, Vec<Vec<f64>>)>> = batch
                .par_iter()
                .map(|&i| {
                    let s = train_set[i];
                    let w = weights.for_label(s.label) * sample_weights.map_or(1.0, |sw| sw[i]);
                    sample_gradient(snapshot, s, w, scale)
                })
                .collect();

            let mut total: Option<Vec<Vec<f64>>> = None;
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, grads) = r?;
                batch_loss += loss;
                match total.as_mut() {
                    None => total = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                        }
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss diverged at epoch {epoch}, batch {batch_index}"
                )));
            }
            loss_sum += batch_loss;
            let grads = total.unwrap_or_default();
            let mut params: Vec<_> = model.params_mut().collect();
            adam_step(&mut params, &grads, &mut state, lr).map_err(|e| match e {
                Error::Numeric(msg) => {
                    Error::Numeric(format!("epoch {epoch}, batch {batch_index}: {msg}"))
                }
                other => other,
            })?;
        }

        let (val_loss, val_accuracy) = loss_and_accuracy(model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "validation loss is non-finite after epoch {epoch}"
            )));
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss,
            val_accuracy,
            lr,
        });
        log::debug!(
            "epoch {epoch}: train_loss {:.4} val_loss {val_loss:.4} val_acc {val_accuracy:.4} lr {lr}",
            loss_sum / train_set.len() as f64
        );
        scheduler.observe(val_loss);
    }
    history.optimizer_steps = state.t;
    Ok(history)
}
