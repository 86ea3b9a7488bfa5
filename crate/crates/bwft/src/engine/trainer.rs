//! The epoch loop: shuffled mini-batches, Adam on the trainable layers, and
//! plateau-driven learning-rate reduction monitored on evaluation accuracy.

use rand::seq::SliceRandom;

use super::{evaluate, TrainConfig};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::loss::cross_entropy;
use crate::model::SequentialModel;
use crate::optim::{adam_step, AdamParams, AdamState};
use crate::rng::{derive_seed, seeded};
use crate::schedule::PlateauSchedule;

pub(crate) struct TrainOutcome {
    pub best_eval_accuracy: f32,
    pub epochs_run: usize,
    /// Learning rate in effect during each epoch.
    pub lr_trace: Vec<f32>,
}

/// Trains `model` in place. Optimizer state exists only for trainable layers,
/// so frozen parameters are never touched.
pub(crate) fn train(
    model: &mut SequentialModel,
    train_data: &LabeledDataset,
    eval_data: &LabeledDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_data.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    let mut rng = seeded(derive_seed(config.seed, "train"));
    let mut schedule = PlateauSchedule::new(config.learning_rate, config.plateau);
    let mut adam = AdamParams { lr: config.learning_rate, ..AdamParams::default() };

    // One optimizer state per parameter tensor of each trainable layer.
    let trainable: Vec<usize> = (0..model.layers().len())
        .filter(|&i| model.is_trainable(i) && model.layers()[i].weighted())
        .collect();
    let mut states: Vec<Vec<AdamState>> = trainable
        .iter()
        .map(|&i| {
            model.layers()[i]
                .params()
                .iter()
                .map(|(_, p)| AdamState::new(p.value.len()))
                .collect()
        })
        .collect();

    let mut best = 0.0f32;
    let mut lr_trace = Vec::with_capacity(config.epochs);
    let mut indices: Vec<usize> = (0..train_data.len()).collect();

    for _ in 0..config.epochs {
        lr_trace.push(adam.lr);
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(config.batch_size) {
            let (x, y) = train_data.batch(chunk);
            let probs = model.forward_train(&x, &mut rng)?;
            let (loss, logits_grad) = cross_entropy(&probs, &y)?;
            if !loss.is_finite() {
                return Err(Error::numeric(format!("loss diverged to {loss}")));
            }
            model.backward_fused(&logits_grad)?;
            for (slot, &layer_idx) in states.iter_mut().zip(&trainable) {
                let layer = &mut model.layers_mut()[layer_idx];
                for ((_, param), state) in layer.params_mut().into_iter().zip(slot.iter_mut()) {
                    adam_step(param.value.data_mut(), param.grad.data(), state, &adam)?;
                }
            }
        }
        let accuracy = evaluate(model, eval_data)?;
        if accuracy > best {
            best = accuracy;
        }
        adam.lr = schedule.on_epoch(accuracy);
    }

    Ok(TrainOutcome {
        best_eval_accuracy: best,
        epochs_run: config.epochs,
        lr_trace,
    })
}
