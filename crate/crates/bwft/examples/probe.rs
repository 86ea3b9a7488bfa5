//! Scratch probe for calibrating desk-scale training configs.

use std::time::Instant;

use bwft::dataset::{generate, split, ShiftKind, SplitSpec, SyntheticTaskSpec};
use bwft::engine::{
    baseline_all_layers, baseline_classifier_only, evaluate, search_blockwise, search_layerwise,
    EngineTrainer, TrainConfig,
};
use bwft::model::{build_backbone, head_rng, pretrain, ZooEntry};
use bwft::schedule::PlateauConfig;
use bwft::segmentation::partition_by_nonweighting;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let entry = if args.len() > 1 { ZooEntry::from_name(&args[1]).unwrap() } else { ZooEntry::MiniVgg };
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let lr: f32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let magnitude: f32 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.25);
    let seeds: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(3);
    let spc: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(60);
    let shift = args.get(7).map(|s| ShiftKind::from_name(s).unwrap()).unwrap_or(ShiftKind::Frequency);
    let batch: usize = 16;

    let source = generate(&SyntheticTaskSpec { samples_per_class: spc, seed: 1000, ..SyntheticTaskSpec::default() }).unwrap();
    let pre_cfg = TrainConfig { learning_rate: 1e-3, batch_size: 8, epochs: 20, plateau: PlateauConfig::default(), seed: 1 };
    let t0 = Instant::now();
    let backbone = build_backbone(entry, &[32, 32, 3], 1).unwrap();
    let report = pretrain(backbone, &source, &pre_cfg).unwrap();
    println!("{entry}: pretrain acc {:.3} in {:?}", report.source_accuracy, t0.elapsed());

    let proto = build_backbone(entry, &[32, 32, 3], 1).unwrap();
    let partition = partition_by_nonweighting(&proto, false).unwrap();
    println!(
        "  blocks: {:?}",
        partition.blocks.iter().map(|b| b.layer_indices.clone()).collect::<Vec<_>>()
    );

    for seed in 0..seeds {
        let t1 = Instant::now();
        let target = generate(&SyntheticTaskSpec {
            samples_per_class: spc,
            seed: 2000 + seed,
            shift,
            shift_magnitude: magnitude,
            ..SyntheticTaskSpec::default()
        })
        .unwrap();
        let splits = split(&target, &SplitSpec { seed: 3000 + seed, ..SplitSpec::default() }).unwrap();

        // Zero-shot check.
        let mut full = build_backbone(entry, &[32, 32, 3], 1).unwrap();
        full.attach_classifier(5, &mut head_rng(pre_cfg.seed)).unwrap();
        report.full_snapshot.restore(&mut full).unwrap();
        let zero_shot = evaluate(&mut full, &splits.test).unwrap();

        let cfg = TrainConfig { learning_rate: lr, batch_size: batch, epochs, plateau: PlateauConfig::default(), seed: 4000 + seed };
        let trainer = EngineTrainer { proto: &proto, snapshot: &report.snapshot, splits: &splits, config: &cfg };

        let b1 = baseline_classifier_only(&trainer).unwrap();
        let b2 = baseline_all_layers(&proto, &trainer).unwrap();
        let bw = search_blockwise(&proto, &trainer, &partition).unwrap();
        let lw = search_layerwise(&proto, &trainer).unwrap();

        println!(
            "  seed {seed}: zs {zero_shot:.3} | b1 {:.3} b2 {:.3} bw {:.3} (block {:?}) lw {:.3} (layer {:?}) | {:?}",
            b1.final_accuracy.unwrap(),
            b2.final_accuracy.unwrap(),
            bw.final_run.final_accuracy.unwrap(),
            bw.selected_unit,
            lw.final_run.final_accuracy.unwrap(),
            lw.selected_unit,
            t1.elapsed()
        );
    }
}
