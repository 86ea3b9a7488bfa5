//! Scratch micro-benchmark for layer costs.

use std::time::Instant;

use bwft::layer::{Activation, Layer, LayerKind, LayerSpec, Mode, Padding};
use bwft::rng::seeded;
use bwft::tensor::Tensor;

fn bench(name: &str, mut layer: Layer, in_shape: &[usize], iters: usize) {
    let x = Tensor::filled(in_shape, 0.3);
    let mut rng = seeded(0);
    // Warm up and get output shape for upstream.
    let y = layer.forward(&x, Mode::Train, true, &mut rng).unwrap();
    let up = Tensor::filled(y.shape(), 0.1);
    layer.backward(&up).unwrap();

    let t0 = Instant::now();
    for _ in 0..iters {
        layer.forward(&x, Mode::Train, true, &mut rng).unwrap();
    }
    let fwd = t0.elapsed();
    let t1 = Instant::now();
    for _ in 0..iters {
        layer.forward(&x, Mode::Train, true, &mut rng).unwrap();
        layer.backward(&up).unwrap();
    }
    let both = t1.elapsed();
    println!(
        "{name:24} fwd {:>8.1?}/iter   bwd {:>8.1?}/iter",
        fwd / iters as u32,
        both.saturating_sub(fwd) / iters as u32
    );
}

fn main() {
    let iters = 200;
    let b = 16;
    let conv = |f, c| {
        Layer::new(
            LayerSpec::new(LayerKind::Conv2D { filters: f, kernel: 3, stride: 1, padding: Padding::Same }, "c"),
            &[32, 32, c],
            &mut seeded(0),
        )
        .unwrap()
    };
    bench("conv 3->8 @32", conv(8, 3), &[b, 32, 32, 3], iters);
    bench("conv 8->8 @32", conv(8, 8), &[b, 32, 32, 8], iters);
    let conv16 = Layer::new(
        LayerSpec::new(LayerKind::Conv2D { filters: 16, kernel: 3, stride: 1, padding: Padding::Same }, "c"),
        &[16, 16, 8],
        &mut seeded(0),
    )
    .unwrap();
    bench("conv 8->16 @16", conv16, &[b, 16, 16, 8], iters);
    let conv32 = Layer::new(
        LayerSpec::new(LayerKind::Conv2D { filters: 32, kernel: 3, stride: 1, padding: Padding::Same }, "c"),
        &[8, 8, 16],
        &mut seeded(0),
    )
    .unwrap();
    bench("conv 16->32 @8", conv32, &[b, 8, 8, 16], iters);

    let dense = Layer::new(LayerSpec::new(LayerKind::Dense { units: 128 }, "d"), &[512], &mut seeded(0)).unwrap();
    bench("dense 512->128", dense, &[b, 512], iters);

    let bn = Layer::new(LayerSpec::new(LayerKind::BatchNorm, "bn"), &[32, 32, 8], &mut seeded(0)).unwrap();
    bench("batchnorm @32x8", bn, &[b, 32, 32, 8], iters);

    let pool = Layer::new(LayerSpec::new(LayerKind::MaxPool2D { window: 2, stride: 2 }, "p"), &[32, 32, 8], &mut seeded(0)).unwrap();
    bench("maxpool @32x8", pool, &[b, 32, 32, 8], iters);

    let relu = Layer::new(LayerSpec::new(LayerKind::Activation { f: Activation::Relu }, "r"), &[32, 32, 8], &mut seeded(0)).unwrap();
    bench("relu @32x8", relu, &[b, 32, 32, 8], iters);

    let drop = Layer::new(LayerSpec::new(LayerKind::Dropout { rate: 0.5 }, "dr"), &[128], &mut seeded(0)).unwrap();
    bench("dropout @128", drop, &[b, 128], iters);

    // Whole-model step cost.
    use bwft::model::{build_backbone, ZooEntry};
    for entry in ZooEntry::ALL {
        let mut m = build_backbone(entry, &[32, 32, 3], 1).unwrap();
        m.attach_classifier(5, &mut seeded(1)).unwrap();
        let x = Tensor::filled(&[b, 32, 32, 3], 0.3);
        let y = Tensor::filled(&[b, 5], 0.2);
        let mut rng = seeded(2);
        let t0 = Instant::now();
        let n = 50;
        for _ in 0..n {
            let probs = m.forward_train(&x, &mut rng).unwrap();
            let (_, g) = bwft::loss::cross_entropy(&probs, &y).unwrap();
            m.backward_fused(&g).unwrap();
        }
        println!("{entry:16} full step {:>8.1?}", t0.elapsed() / n);
    }
}
