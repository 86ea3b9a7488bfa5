//! Scratch probe: per-epoch eval accuracy of mini-vgg-bn pre-training.

use bwft::dataset::{generate, SyntheticTaskSpec};
use bwft::engine::{evaluate, TrainConfig};
use bwft::layer::Mode;
use bwft::loss::cross_entropy;
use bwft::model::{build_backbone, head_rng, ZooEntry};
use bwft::optim::{adam_step, AdamParams, AdamState};
use bwft::rng::seeded;
use bwft::tensor::Tensor;
use rand::seq::SliceRandom;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let entry = if args.len() > 1 { ZooEntry::from_name(&args[1]).unwrap() } else { ZooEntry::MiniVggBn };
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(15);
    let source = generate(&SyntheticTaskSpec { samples_per_class: 60, seed: 1000, ..Default::default() }).unwrap();
    let lr: f32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let batch: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(16);
    let cfg = TrainConfig { learning_rate: lr, batch_size: batch, epochs, ..TrainConfig::default() };

    let mut model = build_backbone(entry, &[32, 32, 3], 1).unwrap();
    model.attach_classifier(5, &mut head_rng(cfg.seed)).unwrap();
    let all = model.weighted_backbone_indices();
    model.set_trainable(&all).unwrap();

    let mut rng = seeded(7);
    let adam = AdamParams { lr: cfg.learning_rate, ..AdamParams::default() };
    let trainable: Vec<usize> = (0..model.layers().len())
        .filter(|&i| model.is_trainable(i) && model.layers()[i].weighted())
        .collect();
    let mut states: Vec<Vec<AdamState>> = trainable
        .iter()
        .map(|&i| model.layers()[i].params().iter().map(|(_, p)| AdamState::new(p.value.len())).collect())
        .collect();

    let mut indices: Vec<usize> = (0..source.len()).collect();
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut last_loss = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let (x, y) = source.batch(chunk);
            let probs = model.forward_train(&x, &mut rng).unwrap();
            let (loss, grad) = cross_entropy(&probs, &y).unwrap();
            last_loss = loss;
            model.backward_fused(&grad).unwrap();
            for (slot, &li) in states.iter_mut().zip(&trainable) {
                let layer = &mut model.layers_mut()[li];
                for ((_, p), st) in layer.params_mut().into_iter().zip(slot.iter_mut()) {
                    adam_step(p.value.data_mut(), p.grad.data(), st, &adam).unwrap();
                }
            }
        }
        let eval_acc = evaluate(&mut model, &source).unwrap();

        // Accuracy with train-mode forward (batch statistics) for comparison.
        let mut correct = 0;
        for chunk in (0..source.len()).collect::<Vec<_>>().chunks(16) {
            let (x, _) = source.batch(chunk);
            let probs = {
                let mut m2 = model.clone();
                m2.forward_train(&x, &mut seeded(1)).unwrap()
            };
            let classes = probs.shape()[1];
            for (row, &i) in probs.data().chunks(classes).zip(chunk) {
                let arg = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
                if arg == source.labels()[i] as usize {
                    correct += 1;
                }
            }
        }
        println!(
            "epoch {epoch}: loss {last_loss:.3} eval(running-stats) {eval_acc:.3} train-mode {:.3}",
            correct as f32 / source.len() as f32
        );
        let _ = Tensor::zeros(&[1]);
        let _ = Mode::Eval;
    }
}
