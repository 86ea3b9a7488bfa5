//! Search strategies over candidate units, plus both baselines.
//!
//! Every strategy follows the same two-phase protocol: fine-tune each
//! candidate unit on the search subset and score it on the evaluation split,
//! pick the best unit (ties toward the lower ordinal), then fine-tune the
//! winner on the full training split. The trainer is injected through
//! [`CandidateTrainer`] so selection logic is testable with stubbed
//! accuracies and candidate runs can execute in parallel.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::{fine_tune, final_run_seed, unit_run_seed, Phase, RunResult, TrainConfig};
use crate::dataset::DataSplits;
use crate::error::{Error, Result};
use crate::model::{SequentialModel, Snapshot};
use crate::rng::{derive_seed, seeded};
use crate::segmentation::{rank_layers, sliding_windows, Partition};

pub trait CandidateTrainer: Sync {
    /// Fine-tunes `unit` on the search subset; `ordinal` is the unit's
    /// position in the sweep and keys its derived seed.
    fn search_run(&self, strategy: &str, ordinal: usize, unit: &[usize]) -> Result<RunResult>;

    /// Fine-tunes `unit` on the full training split. `search_accuracy`
    /// carries the winning unit's search score into the final record.
    fn final_run(&self, strategy: &str, unit: &[usize], search_accuracy: Option<f32>) -> Result<RunResult>;
}

/// The real trainer: snapshot restore + head attach + train, per run.
pub struct EngineTrainer<'a> {
    pub proto: &'a SequentialModel,
    pub snapshot: &'a Snapshot,
    pub splits: &'a DataSplits,
    pub config: &'a TrainConfig,
}

impl CandidateTrainer for EngineTrainer<'_> {
    fn search_run(&self, strategy: &str, ordinal: usize, unit: &[usize]) -> Result<RunResult> {
        let config = TrainConfig {
            seed: unit_run_seed(self.config.seed, ordinal),
            ..self.config.clone()
        };
        fine_tune(
            self.proto,
            self.snapshot,
            unit,
            &self.splits.search,
            &self.splits.test,
            &config,
            strategy,
            Phase::Search,
        )
    }

    fn final_run(&self, strategy: &str, unit: &[usize], search_accuracy: Option<f32>) -> Result<RunResult> {
        let config = TrainConfig {
            seed: final_run_seed(self.config.seed),
            ..self.config.clone()
        };
        let mut result = fine_tune(
            self.proto,
            self.snapshot,
            unit,
            &self.splits.train,
            &self.splits.test,
            &config,
            strategy,
            Phase::Final,
        )?;
        result.search_accuracy = search_accuracy;
        Ok(result)
    }
}

/// Result of one strategy: every candidate's record, the selected unit, and
/// the final full-data run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub strategy: String,
    pub per_unit: Vec<RunResult>,
    /// Ordinal of the winning candidate; `None` for ranked strategies whose
    /// final unit is assembled from several candidates.
    pub selected_ordinal: Option<usize>,
    /// Backbone layer indices fine-tuned in the final phase.
    pub selected_unit: Vec<usize>,
    pub final_run: RunResult,
}

impl SearchResult {
    /// All rows in emission order: candidates first, then the final run.
    pub fn all_runs(&self) -> Vec<&RunResult> {
        self.per_unit.iter().chain(std::iter::once(&self.final_run)).collect()
    }
}

/// Runs the candidate sweep, in parallel, preserving unit order.
fn sweep(trainer: &dyn CandidateTrainer, strategy: &str, units: &[Vec<usize>]) -> Result<Vec<RunResult>> {
    units
        .par_iter()
        .enumerate()
        .map(|(ordinal, unit)| trainer.search_run(strategy, ordinal, unit))
        .collect()
}

/// Argmax over search scores; ties resolve to the lower ordinal.
fn select_best(per_unit: &[RunResult]) -> usize {
    let mut best = 0usize;
    for (i, run) in per_unit.iter().enumerate().skip(1) {
        if run.search_score() > per_unit[best].search_score() {
            best = i;
        }
    }
    best
}

fn conclude(
    trainer: &dyn CandidateTrainer,
    strategy: &str,
    units: Vec<Vec<usize>>,
    per_unit: Vec<RunResult>,
) -> Result<SearchResult> {
    let selected = select_best(&per_unit);
    let unit = units[selected].clone();
    let final_run = trainer.final_run(strategy, &unit, Some(per_unit[selected].search_score()))?;
    Ok(SearchResult {
        strategy: strategy.to_string(),
        per_unit,
        selected_ordinal: Some(selected),
        selected_unit: unit,
        final_run,
    })
}

/// The single-layer sweep shared by the layer-wise search and the ranked
/// strategies: one candidate run per weighted backbone layer.
pub fn layerwise_sweep(proto: &SequentialModel, trainer: &dyn CandidateTrainer) -> Result<Vec<RunResult>> {
    let units: Vec<Vec<usize>> = proto.weighted_backbone_indices().into_iter().map(|i| vec![i]).collect();
    if units.is_empty() {
        return Err(Error::config("no weighted backbone layers to search"));
    }
    sweep(trainer, "lw", &units)
}

/// Searches for the single most salient backbone layer.
pub fn search_layerwise(proto: &SequentialModel, trainer: &dyn CandidateTrainer) -> Result<SearchResult> {
    search_layerwise_cached(proto, trainer, None)
}

/// Layer-wise search that can reuse an existing sweep's candidate results
/// instead of re-running them.
pub fn search_layerwise_cached(
    proto: &SequentialModel,
    trainer: &dyn CandidateTrainer,
    cached: Option<&[RunResult]>,
) -> Result<SearchResult> {
    let units: Vec<Vec<usize>> = proto.weighted_backbone_indices().into_iter().map(|i| vec![i]).collect();
    if units.is_empty() {
        return Err(Error::config("no weighted backbone layers to search"));
    }
    let per_unit = match cached {
        Some(rows) => rows.to_vec(),
        None => sweep(trainer, "lw", &units)?,
    };
    conclude(trainer, "lw", units, per_unit)
}

/// Searches for the most salient block of the given partition.
pub fn search_blockwise(
    proto: &SequentialModel,
    trainer: &dyn CandidateTrainer,
    partition: &Partition,
) -> Result<SearchResult> {
    let _ = proto;
    let units: Vec<Vec<usize>> = partition.blocks.iter().map(|b| b.layer_indices.clone()).collect();
    if units.is_empty() {
        return Err(Error::config("partition has no blocks"));
    }
    let per_unit = sweep(trainer, "bw", &units)?;
    conclude(trainer, "bw", units, per_unit)
}

/// Searches over fixed-width sliding windows of weighted layers.
pub fn search_sliding_window(
    proto: &SequentialModel,
    trainer: &dyn CandidateTrainer,
    width: usize,
) -> Result<SearchResult> {
    let windows = sliding_windows(proto, width)?;
    let units: Vec<Vec<usize>> = windows.into_iter().map(|w| w.layer_indices).collect();
    let per_unit = sweep(trainer, "bwsw", &units)?;
    conclude(trainer, "bwsw", units, per_unit)
}

/// Ranked strategy: reuses the layer-wise sweep (or `cached` results from an
/// earlier one) and jointly fine-tunes the top-`k` layers as one unit.
pub fn search_topk(
    proto: &SequentialModel,
    trainer: &dyn CandidateTrainer,
    k: usize,
    cached: Option<&[RunResult]>,
) -> Result<SearchResult> {
    let strategy = format!("bwt{k}");
    let per_unit = match cached {
        Some(rows) => rows.to_vec(),
        None => layerwise_sweep(proto, trainer)?,
    };
    let scores: Vec<(usize, f32)> = per_unit
        .iter()
        .map(|r| (r.unit[0], r.search_score()))
        .collect();
    let unit = rank_layers(&scores, k)?;
    let final_run = trainer.final_run(&strategy, &unit, None)?;
    Ok(SearchResult {
        strategy,
        per_unit,
        selected_ordinal: None,
        selected_unit: unit,
        final_run,
    })
}

/// Baseline I: only the classifier head is trainable.
pub fn baseline_classifier_only(trainer: &dyn CandidateTrainer) -> Result<RunResult> {
    trainer.final_run("baseline1", &[], None)
}

/// Baseline II: every backbone layer is trainable.
pub fn baseline_all_layers(proto: &SequentialModel, trainer: &dyn CandidateTrainer) -> Result<RunResult> {
    trainer.final_run("baseline2", &proto.weighted_backbone_indices(), None)
}

/// Fine-tunes `count` uniformly sampled distinct weighted backbone layers.
pub fn random_layers_baseline(
    proto: &SequentialModel,
    trainer: &dyn CandidateTrainer,
    count: usize,
    seed: u64,
) -> Result<RunResult> {
    let weighted = proto.weighted_backbone_indices();
    if count == 0 || count > weighted.len() {
        return Err(Error::config(format!(
            "cannot sample {count} of {} weighted layers",
            weighted.len()
        )));
    }
    let mut rng = seeded(derive_seed(seed, "random-layers"));
    let mut unit = rand::seq::index::sample(&mut rng, weighted.len(), count)
        .into_iter()
        .map(|i| weighted[i])
        .collect::<Vec<usize>>();
    unit.sort_unstable();
    trainer.final_run(&format!("random{count}"), &unit, None)
}

/// Test trainer with injected accuracies; counts its invocations so caching
/// contracts are observable.
pub struct StubTrainer {
    pub search_accuracies: Vec<f32>,
    pub final_accuracy: f32,
    pub search_calls: AtomicUsize,
    pub final_calls: AtomicUsize,
}

impl StubTrainer {
    pub fn new(search_accuracies: Vec<f32>) -> StubTrainer {
        StubTrainer {
            search_accuracies,
            final_accuracy: 0.5,
            search_calls: AtomicUsize::new(0),
            final_calls: AtomicUsize::new(0),
        }
    }

    fn result(&self, strategy: &str, unit: &[usize]) -> RunResult {
        RunResult {
            strategy: strategy.to_string(),
            unit: unit.to_vec(),
            unit_names: unit.iter().map(|i| format!("layer{i}")).collect(),
            search_accuracy: None,
            final_accuracy: None,
            epochs_run: 0,
            lr_trace: Vec::new(),
            seed: 0,
            wall_ms: 0,
            failed: false,
        }
    }
}

impl CandidateTrainer for StubTrainer {
    fn search_run(&self, strategy: &str, ordinal: usize, unit: &[usize]) -> Result<RunResult> {
        self.search_calls.fetch_add(1, Ordering::SeqCst);
        let mut r = self.result(strategy, unit);
        r.search_accuracy = Some(self.search_accuracies[ordinal]);
        Ok(r)
    }

    fn final_run(&self, strategy: &str, unit: &[usize], search_accuracy: Option<f32>) -> Result<RunResult> {
        self.final_calls.fetch_add(1, Ordering::SeqCst);
        let mut r = self.result(strategy, unit);
        r.search_accuracy = search_accuracy;
        r.final_accuracy = Some(self.final_accuracy);
        Ok(r)
    }
}
