use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metrics};
use crate::data::SequenceSample;
use crate::error::{Error, Result};
use crate::io::{write_checkpoint, CheckpointInfo};
use crate::model::Model;
use crate::numeric::{rng, AdamConfig, AdamState};
use crate::params::ParamSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation macro-F1 improvement before stopping.
    pub patience: usize,
    pub adam: AdamConfig,
    /// Rescale the batch gradient to at most this global norm.
    pub clip_norm: Option<f64>,
    /// Group similar sequence lengths into the same batch.
    pub bucket_by_length: bool,
    pub seed: u64,
    /// Where the best checkpoint is written whenever it improves.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 100,
            patience: 15,
            adam: AdamConfig::default(),
            clip_norm: None,
            bucket_by_length: true,
            seed: 0,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch_size, patience and max_epochs must be at least 1"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::invalid("clip_norm must be positive"));
            }
        }
        let a = &self.adam;
        if !(a.lr >= 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::invalid("ADAM hyperparameters out of range"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch.
    pub train_loss: f64,
    pub val_macro_f1: f64,
    pub val_accuracy: f64,
    pub val_precision: Vec<f64>,
    pub val_recall: Vec<f64>,
    /// Seconds; left out of the serialized record so logs are reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl EpochReport {
    fn new(epoch: usize, train_loss: f64, m: &Metrics, wall_time: f64) -> Self {
        EpochReport {
            epoch,
            train_loss,
            val_macro_f1: m.macro_f1,
            val_accuracy: m.accuracy,
            val_precision: m.per_class.iter().map(|c| c.precision).collect(),
            val_recall: m.per_class.iter().map(|c| c.recall).collect(),
            wall_time,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights with the best validation macro-F1.
    pub best: Model,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub reports: Vec<EpochReport>,
    pub stopped_early: bool,
}

/// Early-stopping bookkeeping: improvement must be strict.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Record a score; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

const SHUFFLE_STREAM: u64 = 1 << 32;
/// Batches drawn per length-sorted pool.
const BUCKET_POOL: usize = 8;

/// Sample order for one epoch, cut into batches.
pub fn epoch_batches(lengths: &[usize], batch_size: usize, bucket: bool, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut r = rng::stream(seed, SHUFFLE_STREAM + epoch as u64);
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(&mut r);
    if !bucket {
        return order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    }
    let mut batches: Vec<Vec<usize>> = Vec::new();
    for pool in order.chunks_mut(batch_size * BUCKET_POOL) {
        pool.sort_by_key(|&i| lengths[i]);
        batches.extend(pool.chunks(batch_size).map(<[usize]>::to_vec));
    }
    batches.shuffle(&mut r);
    batches
}

fn norms_summary(model: &Model) -> String {
    model
        .params()
        .tensors()
        .into_iter()
        .map(|(n, t)| format!("{n}={:.4e}", t.norm()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Train with ADAM and validation macro-F1 early stopping.
///
/// `on_epoch` sees every report as soon as it exists.
pub fn train(
    model: Model,
    train_set: &[SequenceSample],
    val_set: &[SequenceSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    let mut model = model;
    let mut adam = AdamState::new(cfg.adam, model.params());
    let lengths: Vec<usize> = train_set.iter().map(SequenceSample::len).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut reports = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for (b, batch) in epoch_batches(&lengths, cfg.batch_size, cfg.bucket_by_length, cfg.seed, epoch)
            .into_iter()
            .enumerate()
        {
            let samples: Vec<&SequenceSample> = batch.iter().map(|&i| &train_set[i]).collect();
            let (loss, mut grads) = model.batch_loss_and_grad(&samples)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    norms: norms_summary(&model),
                });
            }
            if let Some(max) = cfg.clip_norm {
                let norm = grads.global_norm();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            adam.step(model.params_mut(), &grads)?;
            loss_sum += loss * samples.len() as f64;
        }
        let metrics = evaluate(&model, val_set)?;
        let report = EpochReport::new(
            epoch,
            loss_sum / train_set.len() as f64,
            &metrics,
            started.elapsed().as_secs_f64(),
        );
        if stopper.observe(epoch, metrics.macro_f1) {
            best = model.clone();
            if let Some(path) = &cfg.checkpoint {
                let info = CheckpointInfo {
                    epoch,
                    val_macro_f1: Some(metrics.macro_f1),
                };
                write_checkpoint(path, &best, &info)?;
            }
        }
        on_epoch(&report)?;
        reports.push(report);
        if stopper.should_stop() {
            stopped_early = true;
            break;
        }
    }
    let (best_epoch, best_val_f1) = stopper.best();
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_val_f1,
        reports,
        stopped_early,
    })
}
