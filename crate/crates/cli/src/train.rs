//! Mini-batch training loop: seeded init, seeded shuffling, Adam updates,
//! per-epoch history, and best-on-validation parameter selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use slipnet_core::{
    forward, parameter_manifest, AdamConfig, AdamState, SlipModelConfig, SlipModelParams, Tensor,
    VisualMode, WindowInput,
};

use crate::dataset::{ForceCalibration, SampleWindow, WindowVisual};
use crate::error::{Error, Result};

/// Conservative default learning rate, sized for real sensor recordings.
pub const DEFAULT_LR: f64 = 1e-7;
/// Learning rate used by the synthetic-data presets, where signals are
/// clean and strong.
pub const SYNTH_LR: f64 = 1e-3;

/// Optimization settings. Model shape (modality, window length, stacks)
/// lives in [`SlipModelConfig`]; this struct holds everything else a run
/// needs to be reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds parameter init and every epoch's shuffle.
    pub seed: u64,
    /// Write a checkpoint every N epochs (consumed by the CLI layer).
    pub checkpoint_every: Option<usize>,
    /// Stop after this many epochs without a validation improvement.
    pub early_stop_patience: Option<usize>,
    /// Stop as soon as an epoch ends with perfect training accuracy.
    pub stop_when_train_perfect: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lr: DEFAULT_LR,
            batch_size: 8,
            epochs: 10,
            seed: 0,
            checkpoint_every: None,
            early_stop_patience: None,
            stop_when_train_perfect: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config(String::from("batch size must be >= 1")));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::Config(String::from("checkpoint_every must be >= 1 epoch")));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::Config(String::from("early_stop_patience must be >= 1 epoch")));
        }
        Ok(())
    }
}

/// One epoch's summary. Validation columns are absent when no validation
/// windows were supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// Result of a training run.
#[derive(Debug)]
pub struct TrainOutcome {
    /// Best-on-validation parameters; final parameters when no validation
    /// set was given.
    pub params: SlipModelParams,
    pub history: Vec<EpochRecord>,
    /// Epoch whose validation accuracy won; `None` without validation.
    pub best_epoch: Option<usize>,
}

/// The visual mode the windows' visual payload implies, so model presets
/// can be adapted to the data they will consume.
pub fn infer_visual_mode(windows: &[SampleWindow]) -> Option<VisualMode> {
    windows.first().map(|w| match &w.visual {
        WindowVisual::Embeddings(frames) => VisualMode::Passthrough {
            dim: frames.first().map_or(0, Vec::len),
        },
        WindowVisual::Images(_) => VisualMode::SmallCnn,
    })
}

fn prepare(
    windows: &[SampleWindow],
    cal: &ForceCalibration,
    seq_len: usize,
    what: &str,
) -> Result<(Vec<WindowInput>, Vec<usize>)> {
    let mut inputs = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    for w in windows {
        if w.len() != seq_len {
            return Err(Error::Config(format!(
                "{what} window from {} has {} frames, model expects {seq_len}",
                w.episode_id,
                w.len()
            )));
        }
        inputs.push(w.to_input(cal)?);
        labels.push(w.label.index());
    }
    Ok((inputs, labels))
}

/// Correct predictions in a [B, 2] logit batch; ties resolve to slip.
fn count_correct(logits: &Tensor, labels: &[usize]) -> usize {
    let data = logits.to_vec();
    labels
        .iter()
        .enumerate()
        .filter(|&(i, &label)| {
            let predicted = usize::from(data[2 * i + 1] > data[2 * i]);
            predicted == label
        })
        .count()
}

/// Mean loss and accuracy over a set without updating parameters.
fn assess(
    model_cfg: &SlipModelConfig,
    params: &SlipModelParams,
    inputs: &[WindowInput],
    labels: &[usize],
    batch_size: usize,
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for (chunk, chunk_labels) in inputs.chunks(batch_size).zip(labels.chunks(batch_size)) {
        let logits = forward(model_cfg, params, chunk)?;
        let loss = logits.softmax_cross_entropy(chunk_labels)?;
        loss_sum += loss.item() * chunk.len() as f64;
        correct += count_correct(&logits, chunk_labels);
    }
    Ok((loss_sum / inputs.len() as f64, correct as f64 / inputs.len() as f64))
}

/// Trains a freshly initialized model on `train_windows`.
///
/// One seeded RNG stream drives initialization and every shuffle, so equal
/// inputs reproduce equal outputs bit for bit. The last partial batch is
/// kept. `epoch_hook` runs after every epoch with the live parameters
/// (checkpoint writers hang off this). Zero epochs returns the untouched
/// initialization.
pub fn train(
    model_cfg: &SlipModelConfig,
    cfg: &TrainConfig,
    cal: &ForceCalibration,
    train_windows: &[SampleWindow],
    val_windows: &[SampleWindow],
    mut epoch_hook: impl FnMut(&EpochRecord, &SlipModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if train_windows.is_empty() {
        return Err(Error::Config(String::from("training set is empty")));
    }
    let (inputs, labels) = prepare(train_windows, cal, model_cfg.seq_len, "training")?;
    let (val_inputs, val_labels) = prepare(val_windows, cal, model_cfg.seq_len, "validation")?;

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let params = SlipModelParams::init(model_cfg, &mut rng)?;
    let named = params.named_tensors();
    let manifest = parameter_manifest(model_cfg)?;
    debug_assert_eq!(manifest.len(), named.len());
    let mut optimized: Vec<(String, Tensor, AdamState)> = named
        .iter()
        .zip(&manifest)
        .filter(|(_, entry)| entry.trainable)
        .map(|((name, tensor), _)| {
            (name.clone(), tensor.clone(), AdamState::new(tensor.numel(), AdamConfig::new(cfg.lr)))
        })
        .collect();

    if cfg.epochs == 0 {
        return Ok(TrainOutcome { params: params.snapshot()?, history: Vec::new(), best_epoch: None });
    }

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, SlipModelParams)> = None;
    let mut indices: Vec<usize> = (0..inputs.len()).collect();

    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (batch_idx, batch) in indices.chunks(cfg.batch_size).enumerate() {
            let batch_inputs: Vec<WindowInput> = batch.iter().map(|&i| inputs[i].clone()).collect();
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let context = |e: slipnet_core::Error| {
                Error::Train(format!("{e} (epoch {epoch}, batch {batch_idx})"))
            };
            let logits = forward(model_cfg, &params, &batch_inputs).map_err(context)?;
            let loss = logits.softmax_cross_entropy(&batch_labels).map_err(context)?;
            let loss_val = loss.item();
            if !loss_val.is_finite() {
                return Err(Error::Train(format!(
                    "non-finite loss {loss_val} (epoch {epoch}, batch {batch_idx})"
                )));
            }
            loss_sum += loss_val * batch.len() as f64;
            correct += count_correct(&logits, &batch_labels);
            loss.backward().map_err(context)?;
            for (name, tensor, adam) in &mut optimized {
                adam.step_param(name, tensor).map_err(|e| {
                    Error::Train(format!("{e} (epoch {epoch}, batch {batch_idx})"))
                })?;
            }
            for (_, tensor) in &named {
                tensor.zero_grad();
            }
        }

        let (val_loss, val_accuracy) = if val_inputs.is_empty() {
            (None, None)
        } else {
            let (l, a) = assess(model_cfg, &params, &val_inputs, &val_labels, cfg.batch_size)?;
            (Some(l), Some(a))
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / inputs.len() as f64,
            train_accuracy: correct as f64 / inputs.len() as f64,
            val_loss,
            val_accuracy,
        };
        history.push(record);
        epoch_hook(&record, &params)?;

        if let Some(acc) = val_accuracy {
            let improved = best.as_ref().is_none_or(|(best_acc, _, _)| acc > *best_acc);
            if improved {
                best = Some((acc, epoch, params.snapshot()?));
            } else if let Some(patience) = cfg.early_stop_patience {
                let since_best = epoch - best.as_ref().map_or(0, |(_, e, _)| *e);
                if since_best >= patience {
                    break;
                }
            }
        }
        if cfg.stop_when_train_perfect && record.train_accuracy == 1.0 {
            break;
        }
    }

    let (best_epoch, final_params) = match best {
        Some((_, epoch, snapshot)) => (Some(epoch), snapshot),
        None => (None, params.snapshot()?),
    };
    Ok(TrainOutcome { params: final_params, history, best_epoch })
}
