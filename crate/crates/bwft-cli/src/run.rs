//! The `run` subcommand: pretrain each model, execute every requested
//! strategy, and emit runs/curve/summary CSVs plus a digest manifest.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use bwft::dataset::{generate, split, DataSplits, SplitSpec};
use bwft::engine::{
    baseline_all_layers, baseline_classifier_only, random_layers_baseline, search_blockwise,
    search_layerwise_cached, search_sliding_window, search_topk, EngineTrainer, RunResult,
    SearchResult,
};
use bwft::error::Result;
use bwft::model::{build_backbone, pretrain, SequentialModel, Snapshot, ZooEntry};
use bwft::report::{curve_to_csv, runs_to_csv, SummaryTable};
use bwft::rng::{derive_seed, derive_seed_indexed};
use bwft::segmentation::partition_by_nonweighting;

use crate::plan::{ExperimentPlan, Strategy};

/// Everything one (model, strategy) cell produced.
struct CellOutput {
    model: ZooEntry,
    strategy: Strategy,
    /// All run rows, repeats concatenated in order.
    rows: Vec<RunResult>,
    /// Per-repeat (ordinal, unit, search accuracy) curves; empty for
    /// strategies without a candidate sweep.
    curves: Vec<Vec<(usize, String, f32)>>,
    /// Final accuracy per repeat.
    finals: Vec<f32>,
}

struct ModelContext {
    entry: ZooEntry,
    proto: SequentialModel,
    snapshot: Snapshot,
    splits: DataSplits,
    source_accuracy: f32,
}

fn prepare_model(plan: &ExperimentPlan, entry: ZooEntry) -> Result<ModelContext> {
    let master = plan.seed;
    let shape = [plan.image_size, plan.image_size, 3];
    let source = generate(&plan.source_task(derive_seed(master, "source-task")))?;
    let target = generate(&plan.target_task(derive_seed(master, "target-task")))?;

    let init_seed = derive_seed(master, &format!("init-{}", entry.name()));
    let backbone = build_backbone(entry, &shape, init_seed)?;
    let pre_cfg = plan.pretrain_config(derive_seed(master, &format!("pretrain-{}", entry.name())));
    let report = pretrain(backbone, &source, &pre_cfg)?;

    let splits = split(
        &target,
        &SplitSpec {
            seed: derive_seed(master, &format!("split-{}", entry.name())),
            ..SplitSpec::default()
        },
    )?;
    let proto = build_backbone(entry, &shape, init_seed)?;
    Ok(ModelContext {
        entry,
        proto,
        snapshot: report.snapshot,
        splits,
        source_accuracy: report.source_accuracy,
    })
}

fn search_curve(result: &SearchResult) -> Vec<(usize, String, f32)> {
    result
        .per_unit
        .iter()
        .enumerate()
        .map(|(ordinal, run)| (ordinal, run.unit_names.join("+"), run.search_score()))
        .collect()
}

/// Runs every strategy for one model. Strategies execute in plan order; the
/// layer-wise candidate sweep is computed at most once per repeat and shared
/// by `lw` and the `bwt<k>` strategies. The first strategy that computes the
/// sweep also emits its candidate rows.
fn run_model(plan: &ExperimentPlan, ctx: &ModelContext) -> Result<Vec<CellOutput>> {
    let mut sweep_cache: BTreeMap<usize, Vec<RunResult>> = BTreeMap::new();
    let mut outputs = Vec::new();

    for &strategy in &plan.strategies {
        let mut rows: Vec<RunResult> = Vec::new();
        let mut curves = Vec::new();
        let mut finals = Vec::new();

        for repeat in 0..plan.repeats {
            let run_seed =
                derive_seed_indexed(plan.seed, &format!("run-{}", ctx.entry.name()), repeat as u64);
            let config = plan.train_config(run_seed);
            let trainer = EngineTrainer {
                proto: &ctx.proto,
                snapshot: &ctx.snapshot,
                splits: &ctx.splits,
                config: &config,
            };

            match strategy {
                Strategy::Baseline1 => {
                    let run = baseline_classifier_only(&trainer)?;
                    finals.push(run.final_accuracy.unwrap_or(0.0));
                    rows.push(run);
                }
                Strategy::Baseline2 => {
                    let run = baseline_all_layers(&ctx.proto, &trainer)?;
                    finals.push(run.final_accuracy.unwrap_or(0.0));
                    rows.push(run);
                }
                Strategy::RandomLayers(count) => {
                    let run = random_layers_baseline(&ctx.proto, &trainer, count, run_seed)?;
                    finals.push(run.final_accuracy.unwrap_or(0.0));
                    rows.push(run);
                }
                Strategy::LayerWise => {
                    let cached = sweep_cache.get(&repeat).cloned();
                    let fresh = cached.is_none();
                    let result = search_layerwise_cached(&ctx.proto, &trainer, cached.as_deref())?;
                    finals.push(result.final_run.final_accuracy.unwrap_or(0.0));
                    curves.push(search_curve(&result));
                    if fresh {
                        sweep_cache.insert(repeat, result.per_unit.clone());
                        rows.extend(result.per_unit.iter().cloned());
                    }
                    rows.push(result.final_run);
                }
                Strategy::BlockWise => {
                    let partition = partition_by_nonweighting(&ctx.proto, plan.delimit_batchnorm)?;
                    let result = search_blockwise(&ctx.proto, &trainer, &partition)?;
                    finals.push(result.final_run.final_accuracy.unwrap_or(0.0));
                    curves.push(search_curve(&result));
                    rows.extend(result.all_runs().into_iter().cloned());
                }
                Strategy::SlidingWindow(_) => {
                    let result = search_sliding_window(&ctx.proto, &trainer, plan.window)?;
                    finals.push(result.final_run.final_accuracy.unwrap_or(0.0));
                    curves.push(search_curve(&result));
                    rows.extend(result.all_runs().into_iter().cloned());
                }
                Strategy::TopK(k) => {
                    let cached = sweep_cache.get(&repeat).cloned();
                    let fresh = cached.is_none();
                    let result = search_topk(&ctx.proto, &trainer, k, cached.as_deref())?;
                    finals.push(result.final_run.final_accuracy.unwrap_or(0.0));
                    if fresh {
                        sweep_cache.insert(repeat, result.per_unit.clone());
                        rows.extend(result.per_unit.iter().cloned());
                    }
                    rows.push(result.final_run);
                }
            }
        }

        outputs.push(CellOutput { model: ctx.entry, strategy, rows, curves, finals });
    }
    Ok(outputs)
}

pub fn cmd_run(plan: &ExperimentPlan) -> Result<()> {
    plan.validate()?;
    std::fs::create_dir_all(&plan.out_dir)?;

    // Pretrain contexts in parallel across models, then run each model's
    // strategy list (candidate sweeps parallelize internally).
    let contexts: Vec<ModelContext> = plan
        .models
        .par_iter()
        .map(|&entry| prepare_model(plan, entry))
        .collect::<Result<Vec<_>>>()?;
    for ctx in &contexts {
        eprintln!(
            "pretrained {} (source accuracy {:.3})",
            ctx.entry.name(),
            ctx.source_accuracy
        );
    }

    let cells: Vec<CellOutput> = contexts
        .par_iter()
        .map(|ctx| run_model(plan, ctx))
        .collect::<Result<Vec<Vec<CellOutput>>>>()?
        .into_iter()
        .flatten()
        .collect();

    // Single writer: all artifacts are assembled and written here, serially.
    let mut artifacts: Vec<(String, String)> = Vec::new();
    for cell in &cells {
        let refs: Vec<&RunResult> = cell.rows.iter().collect();
        artifacts.push((
            format!("runs_{}_{}.csv", cell.model.name(), cell.strategy.name()),
            runs_to_csv(&refs),
        ));
        if !cell.curves.is_empty() {
            artifacts.push((
                format!("curve_{}_{}.csv", cell.model.name(), cell.strategy.name()),
                curve_to_csv(&cell.curves),
            ));
        }
        eprintln!(
            "{} {}: final {:.3}{}",
            cell.model.name(),
            cell.strategy.name(),
            cell.finals.iter().sum::<f32>() / cell.finals.len().max(1) as f32,
            if plan.repeats > 1 { format!(" (mean of {} repeats)", plan.repeats) } else { String::new() }
        );
    }

    // Summary: cell value is the mean final accuracy over repeats.
    let mut table = SummaryTable::new(
        plan.models.iter().map(|m| m.name().to_string()).collect(),
        plan.strategies.iter().map(|s| s.name()).collect(),
        plan.variance,
    );
    for cell in &cells {
        if !cell.finals.is_empty() {
            let mean = cell.finals.iter().map(|&a| a as f64).sum::<f64>() / cell.finals.len() as f64;
            table.set(cell.model.name(), &cell.strategy.name(), mean);
        }
    }
    artifacts.push(("summary.csv".into(), table.to_csv()));

    if let Some((name, mean, var, lowest)) = table.best_strategy() {
        println!(
            "best strategy: {name} (mean {mean:.6}, variance {var:.6}{})",
            if lowest { ", lowest variance" } else { "" }
        );
    }

    write_artifacts(&plan.out_dir, plan, &artifacts)
}

fn write_artifacts(dir: &Path, plan: &ExperimentPlan, artifacts: &[(String, String)]) -> Result<()> {
    let mut manifest = String::new();
    for (key, value) in plan.echo() {
        manifest.push_str(&format!("plan.{key}={value}\n"));
    }
    for (name, content) in artifacts {
        std::fs::write(dir.join(name), content)?;
        let mut hasher = Sha256::new();
        hasher.update(content.as_bytes());
        let digest: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        manifest.push_str(&format!("artifact.{name}={digest}\n"));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}
