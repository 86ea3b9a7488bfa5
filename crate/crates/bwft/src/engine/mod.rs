//! Fine-tuning engine: single-run training, evaluation, and run records.

pub mod strategy;
mod trainer;

pub use strategy::{
    baseline_all_layers, baseline_classifier_only, layerwise_sweep, random_layers_baseline,
    search_blockwise, search_layerwise, search_layerwise_cached, search_sliding_window,
    search_topk, CandidateTrainer, EngineTrainer, SearchResult, StubTrainer,
};

use std::time::Instant;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{head_rng, SequentialModel, Snapshot};
use crate::rng::{derive_seed, derive_seed_indexed};
use crate::schedule::PlateauConfig;

pub const PAPER_EPOCHS: usize = 50;
pub const DESK_SCALE_EPOCHS: usize = 15;

/// Training recipe for one run. Defaults mirror the reference recipe
/// (Adam at 5e-5, batch size 4, 50 epochs, reduce-on-plateau); desk-scale
/// experiments shorten the epoch count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub plateau: PlateauConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 4,
            epochs: PAPER_EPOCHS,
            plateau: PlateauConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn desk_scale() -> TrainConfig {
        TrainConfig { epochs: DESK_SCALE_EPOCHS, ..TrainConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("learning rate, batch size, and epochs must be positive"));
        }
        Ok(())
    }

    /// Short stable digest of the recipe, recorded in snapshot provenance.
    pub fn digest(&self) -> String {
        format!(
            "lr={};bs={};ep={};pl={},{},{};seed={}",
            self.learning_rate,
            self.batch_size,
            self.epochs,
            self.plateau.factor,
            self.plateau.patience,
            self.plateau.min_lr,
            self.seed
        )
    }
}

/// Outcome of one candidate or final fine-tuning run.
///
/// `search_accuracy` is the best evaluation accuracy over epochs when the run
/// trained on the search subset; `final_accuracy` the same when it trained on
/// the full training split. Runs that hit a numeric failure are flagged
/// `failed` and score zero instead of aborting a sweep.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub strategy: String,
    /// Backbone layer indices of the adapted unit, ascending.
    pub unit: Vec<usize>,
    pub unit_names: Vec<String>,
    pub search_accuracy: Option<f32>,
    pub final_accuracy: Option<f32>,
    pub epochs_run: usize,
    pub lr_trace: Vec<f32>,
    pub seed: u64,
    pub wall_ms: u64,
    pub failed: bool,
}

impl RunResult {
    /// Score used for unit selection; failed runs score 0.
    pub fn search_score(&self) -> f32 {
        if self.failed {
            0.0
        } else {
            self.search_accuracy.unwrap_or(0.0)
        }
    }
}

/// Wall time is measurement noise, not an outcome, so it is excluded here.
impl PartialEq for RunResult {
    fn eq(&self, other: &Self) -> bool {
        self.strategy == other.strategy
            && self.unit == other.unit
            && self.unit_names == other.unit_names
            && self.search_accuracy.map(f32::to_bits) == other.search_accuracy.map(f32::to_bits)
            && self.final_accuracy.map(f32::to_bits) == other.final_accuracy.map(f32::to_bits)
            && self.epochs_run == other.epochs_run
            && self.lr_trace.len() == other.lr_trace.len()
            && self
                .lr_trace
                .iter()
                .zip(&other.lr_trace)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.seed == other.seed
            && self.failed == other.failed
    }
}

/// Fraction of argmax-correct predictions in eval mode. Argmax ties resolve
/// to the lowest class index. Deterministic; errors on an empty dataset.
pub fn evaluate(model: &mut SequentialModel, data: &LabeledDataset) -> Result<f32> {
    if data.is_empty() {
        return Err(Error::config("cannot evaluate on an empty dataset"));
    }
    const EVAL_CHUNK: usize = 64;
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (x, _) = data.batch(chunk);
        let probs = model.forward_eval(&x)?;
        let classes = *probs.shape().last().expect("probs have a class axis");
        for (row, &i) in probs.data().chunks(classes).zip(chunk) {
            if argmax(row) == data.labels()[i] as usize {
                correct += 1;
            }
        }
    }
    Ok(correct as f32 / data.len() as f32)
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Restores the snapshot into a fresh copy of the backbone, attaches a newly
/// initialized head, freezes everything outside `unit` ∪ head, and trains.
///
/// Numeric failures (NaN/Inf anywhere in the run) produce a failed
/// `RunResult` with accuracy zero rather than an error, so one diverging
/// candidate cannot kill a sweep.
#[allow(clippy::too_many_arguments)]
pub fn fine_tune(
    proto: &SequentialModel,
    snapshot: &Snapshot,
    unit: &[usize],
    train_data: &LabeledDataset,
    eval_data: &LabeledDataset,
    config: &TrainConfig,
    strategy: &str,
    phase: Phase,
) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let mut model = proto.clone();
    snapshot.restore(&mut model)?;
    model.attach_classifier(eval_data.num_classes(), &mut head_rng(config.seed))?;
    model.set_trainable(unit)?;

    let unit_names: Vec<String> = unit
        .iter()
        .map(|&i| proto.layers()[i].name().to_string())
        .collect();
    let base = RunResult {
        strategy: strategy.to_string(),
        unit: unit.to_vec(),
        unit_names,
        search_accuracy: None,
        final_accuracy: None,
        epochs_run: 0,
        lr_trace: Vec::new(),
        seed: config.seed,
        wall_ms: 0,
        failed: false,
    };

    match trainer::train(&mut model, train_data, eval_data, config) {
        Ok(outcome) => {
            let mut result = base;
            result.epochs_run = outcome.epochs_run;
            result.lr_trace = outcome.lr_trace;
            result.wall_ms = started.elapsed().as_millis() as u64;
            match phase {
                Phase::Search => result.search_accuracy = Some(outcome.best_eval_accuracy),
                Phase::Final => result.final_accuracy = Some(outcome.best_eval_accuracy),
            }
            Ok(result)
        }
        Err(Error::Numeric(_)) => {
            let mut result = base;
            result.failed = true;
            result.wall_ms = started.elapsed().as_millis() as u64;
            match phase {
                Phase::Search => result.search_accuracy = Some(0.0),
                Phase::Final => result.final_accuracy = Some(0.0),
            }
            Ok(result)
        }
        Err(other) => Err(other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Search,
    Final,
}

/// Seed for candidate run `ordinal` of a sweep; independent of sweep
/// execution order, so parallel and serial sweeps agree bit-for-bit.
pub fn unit_run_seed(master: u64, ordinal: usize) -> u64 {
    derive_seed_indexed(master, "search-unit", ordinal as u64)
}

/// Entry point for pre-training: the plain epoch loop on an already
/// configured model (evaluating on the source data itself).
pub(crate) fn train_for_pretrain(
    model: &mut SequentialModel,
    source: &LabeledDataset,
    config: &TrainConfig,
) -> Result<()> {
    trainer::train(model, source, source, config).map(|_| ())
}

/// Seed for the full-data fine-tune of the selected unit.
pub fn final_run_seed(master: u64) -> u64 {
    derive_seed(master, "final")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{Activation, LayerKind, LayerSpec};
    use crate::rng::seeded;

    /// A model whose output is constant: zeroed dense then softmax.
    fn constant_model(classes: usize) -> SequentialModel {
        let specs = vec![
            LayerSpec::new(LayerKind::Flatten, "flat"),
            LayerSpec::new(LayerKind::Dense { units: classes }, "dense"),
            LayerSpec::new(LayerKind::Activation { f: Activation::Softmax }, "softmax"),
        ];
        let mut m = SequentialModel::from_specs(specs, &[2, 2, 1], &mut seeded(0)).unwrap();
        for layer in m.layers_mut() {
            for (_, p) in layer.params_mut() {
                p.value.data_mut().fill(0.0);
            }
        }
        m
    }

    fn dataset(labels: &[u16], classes: usize) -> LabeledDataset {
        let images = vec![0.5f32; labels.len() * 4];
        LabeledDataset::new(
            2,
            2,
            1,
            classes,
            images,
            labels.to_vec(),
            (0..classes).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_predictions_score_frequency_of_class_zero() {
        let mut m = constant_model(5);
        let data = dataset(&[0, 0, 1, 2, 3, 4, 4, 4, 4, 4], 5);
        let acc = evaluate(&mut m, &data).unwrap();
        assert!((acc - 0.2).abs() < 1e-6);
    }

    #[test]
    fn perfect_and_adversarial_predictions() {
        // Bias the constant model toward class 1.
        let mut m = constant_model(3);
        for layer in m.layers_mut() {
            for (name, p) in layer.params_mut() {
                if name == "bias" {
                    p.value.data_mut()[1] = 5.0;
                }
            }
        }
        let all_ones = dataset(&[1, 1, 1, 1], 3);
        assert_eq!(evaluate(&mut m, &all_ones).unwrap(), 1.0);
        let never_one = dataset(&[0, 2, 0, 2], 3);
        assert_eq!(evaluate(&mut m, &never_one).unwrap(), 0.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let mut m = constant_model(3);
        let empty = LabeledDataset::new(2, 2, 1, 3, vec![], vec![], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert!(evaluate(&mut m, &empty).is_err());
    }

    #[test]
    fn argmax_breaks_ties_toward_lower_index() {
        assert_eq!(argmax(&[0.2, 0.2, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }
}
