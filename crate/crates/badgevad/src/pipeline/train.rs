//! Training loops: balanced class weighting, fixed-epoch training and
//! early-stopped training to convergence.

use crate::error::{Error, Result};
use crate::features::WindowDataset;
use crate::models::TrainedModel;
use crate::nn::loss::weighted_bce;
use crate::nn::optim::adam_step;
use crate::nn::DetRng;

/// Optimizer learning rate used throughout.
pub const LEARNING_RATE: f64 = 0.001;

const SHUFFLE_STREAM: u64 = 0x5348;

/// Balanced class weights `w_c = N / (2·N_c)` for binary labels.
pub fn class_weights(labels: &[u8]) -> Result<(f64, f64)> {
    let n = labels.len() as f64;
    let positives = labels.iter().filter(|&&l| l == 1).count() as f64;
    let negatives = n - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(Error::InvalidInput(
            "class weights need both classes present".into(),
        ));
    }
    Ok((n / (2.0 * negatives), n / (2.0 * positives)))
}

/// Loss and accuracy of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub binary_accuracy: f64,
}

/// Per-epoch training history.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
}

struct EpochRunner<'a> {
    dataset: &'a WindowDataset,
    weights: (f64, f64),
    seed: u64,
    batch_size: usize,
    step: u64,
}

impl<'a> EpochRunner<'a> {
    fn new(
        dataset: &'a WindowDataset,
        weights: (f64, f64),
        seed: u64,
        batch_size: usize,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("training dataset is empty".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be >= 1".into()));
        }
        Ok(EpochRunner { dataset, weights, seed, batch_size, step: 0 })
    }

    /// Runs one epoch: shuffles, steps through batches (final partial batch
    /// kept), and reports the epoch's weighted loss and binary accuracy over
    /// the training-mode forward passes.
    fn run_epoch(&mut self, model: &mut TrainedModel, epoch_index: u64) -> Result<EpochStats> {
        let n = self.dataset.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = DetRng::derive(self.seed, &[SHUFFLE_STREAM, epoch_index]);
        rng.shuffle(&mut order);

        let sample_stride = self.dataset.window * self.dataset.feature_count;
        let mut correct = 0usize;
        let mut loss_weighted_sum = 0.0;
        let mut weight_sum = 0.0;

        for batch_indices in order.chunks(self.batch_size) {
            let mut batch = Vec::with_capacity(batch_indices.len() * sample_stride);
            let mut labels = Vec::with_capacity(batch_indices.len());
            let mut weights = Vec::with_capacity(batch_indices.len());
            for &i in batch_indices {
                batch.extend_from_slice(self.dataset.sample(i));
                labels.push(self.dataset.labels[i]);
                weights.push(if self.dataset.labels[i] == 1 { self.weights.1 } else { self.weights.0 });
            }

            let (probs, caches) = model.forward_train(&batch)?;
            let (loss, dprobs) = weighted_bce(&probs, &labels, &weights)?;
            model.backward_train(caches, &dprobs)?;
            self.step += 1;
            adam_step(&mut model.parameters_mut(), LEARNING_RATE, self.step)?;

            correct += probs
                .iter()
                .zip(&labels)
                .filter(|(&p, &y)| (p >= 0.5) == (y == 1))
                .count();
            let batch_weight: f64 = weights.iter().sum();
            loss_weighted_sum += loss * batch_weight;
            weight_sum += batch_weight;
        }

        Ok(EpochStats {
            loss: loss_weighted_sum / weight_sum,
            binary_accuracy: correct as f64 / n as f64,
        })
    }
}

/// Trains for a fixed number of epochs with per-epoch shuffles.
///
/// Runs `epochs × ceil(N / batch_size)` optimizer steps; the final partial
/// batch is kept. The model's metadata records the epochs run and the last
/// epoch's training accuracy.
pub fn train(
    model: &mut TrainedModel,
    dataset: &WindowDataset,
    epochs: usize,
    batch_size: usize,
    weights: (f64, f64),
    seed: u64,
) -> Result<TrainReport> {
    let mut runner = EpochRunner::new(dataset, weights, seed, batch_size)?;
    let mut report = TrainReport::default();
    for epoch in 0..epochs {
        let stats = runner.run_epoch(model, epoch as u64)?;
        report.history.push(stats);
    }
    model.meta.epochs_run = epochs as u32;
    model.meta.final_train_accuracy =
        report.history.last().map(|s| s.binary_accuracy).unwrap_or(0.0);
    Ok(report)
}

/// Early-stopping configuration for [`train_to_convergence`].
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceConfig {
    pub patience: usize,
    pub min_delta: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { patience: 5, min_delta: 1e-3, max_epochs: 200, batch_size: 4000 }
    }
}

/// Trains until the training binary accuracy stops improving.
///
/// Stops when the best accuracy has not improved by at least `min_delta` for
/// `patience` consecutive epochs (or at `max_epochs`), then restores the
/// parameters from the best-accuracy epoch. `epochs_run` in the metadata is
/// the number of epochs actually executed.
pub fn train_to_convergence(
    model: &mut TrainedModel,
    dataset: &WindowDataset,
    weights: (f64, f64),
    seed: u64,
    config: &ConvergenceConfig,
) -> Result<TrainReport> {
    let mut runner = EpochRunner::new(dataset, weights, seed, config.batch_size)?;
    let mut report = TrainReport::default();
    // exact best tracks which parameters to keep; the patience counter only
    // resets on improvements of at least min_delta
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut patience_baseline = f64::NEG_INFINITY;
    let mut best_snapshot: Vec<u8> = Vec::new();
    let mut best_epoch = 0usize;
    let mut epochs_without_improvement = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 0..config.max_epochs {
        let stats = runner.run_epoch(model, epoch as u64)?;
        report.history.push(stats);
        epochs_run = epoch + 1;
        if stats.binary_accuracy > best_accuracy {
            best_accuracy = stats.binary_accuracy;
            best_epoch = epoch;
            best_snapshot.clear();
            model.save(&mut best_snapshot)?;
        }
        if stats.binary_accuracy - patience_baseline >= config.min_delta {
            patience_baseline = stats.binary_accuracy;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= config.patience {
                break;
            }
        }
    }

    if !best_snapshot.is_empty() {
        *model = TrainedModel::load(best_snapshot.as_slice())?;
    }
    model.meta.epochs_run = epochs_run as u32;
    model.meta.final_train_accuracy = report.history[best_epoch].binary_accuracy;
    Ok(report)
}
