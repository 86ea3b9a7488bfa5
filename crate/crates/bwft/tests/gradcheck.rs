//! Central-finite-difference oracle for every layer kind's backward pass.
//!
//! The objective is a random linear functional of the layer output,
//! L = sum(output * R), so dL/d(output) = R. Analytic gradients from
//! `backward` are compared against (L(x+h) - L(x-h)) / 2h elementwise, with
//! h = 1e-3 and a relative-error floor of 1 (so tiny gradients are compared
//! absolutely at the same 1e-3 threshold).

use bwft::layer::{Activation, Layer, LayerKind, LayerSpec, Mode, Padding};
use bwft::rng::{seeded, RunRng};
use bwft::tensor::Tensor;
use rand::Rng;

const H: f64 = 1e-3;
const TOLERANCE: f64 = 1e-3;

fn random_tensor(shape: &[usize], rng: &mut RunRng, offset: f32) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        let raw = rng.gen::<f32>() * 2.0 - 1.0;
        // Push values away from zero to dodge relu kinks near h.
        *v = raw + raw.signum() * offset;
    }
    t
}

/// Distinct values with pairwise gaps well above 2h, randomly placed, so
/// max-pool argmaxes cannot flip under finite-difference perturbation.
fn distinct_tensor(shape: &[usize], rng: &mut RunRng) -> Tensor {
    use rand::seq::SliceRandom;
    let n: usize = shape.iter().product();
    let mut values: Vec<f32> = (0..n).map(|i| -1.0 + i as f32 * 0.02).collect();
    values.shuffle(rng);
    Tensor::from_vec(shape, values).unwrap()
}

fn objective(layer: &mut Layer, input: &Tensor, upstream: &Tensor, forward_seed: u64) -> f64 {
    let out = layer
        .forward(input, Mode::Train, true, &mut seeded(forward_seed))
        .expect("forward");
    out.data()
        .iter()
        .zip(upstream.data())
        .map(|(o, r)| *o as f64 * *r as f64)
        .sum()
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Checks input and parameter gradients of one layer instance; returns the
/// max relative error observed.
fn check_layer(mut layer: Layer, batch: usize, seed: u64, kink_offset: f32) -> f64 {
    let mut rng = seeded(seed);
    let mut in_shape = vec![batch];
    in_shape.extend_from_slice(layer.in_shape());
    let pooling = matches!(layer.spec().kind, LayerKind::MaxPool2D { .. });
    let mut input = if pooling {
        distinct_tensor(&in_shape, &mut rng)
    } else {
        random_tensor(&in_shape, &mut rng, kink_offset)
    };

    let mut out_shape = vec![batch];
    out_shape.extend_from_slice(layer.out_shape());
    let upstream = random_tensor(&out_shape, &mut rng, 0.2);

    let forward_seed = seed ^ 0x5eed;
    // Arm the caches, then take analytic gradients.
    layer
        .forward(&input, Mode::Train, true, &mut seeded(forward_seed))
        .expect("forward");
    let din = layer.backward(&upstream).expect("backward");

    let mut max_err = 0.0f64;

    // Input gradients.
    for i in 0..input.len() {
        let orig = input.data()[i];
        input.data_mut()[i] = orig + H as f32;
        let plus = objective(&mut layer, &input, &upstream, forward_seed);
        input.data_mut()[i] = orig - H as f32;
        let minus = objective(&mut layer, &input, &upstream, forward_seed);
        input.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * H);
        max_err = max_err.max(relative_error(din.data()[i] as f64, numeric));
    }

    // Parameter gradients.
    let param_count = layer.params().len();
    for p in 0..param_count {
        for i in 0..layer.params()[p].1.value.len() {
            let orig = layer.params_mut()[p].1.value.data()[i];
            layer.params_mut()[p].1.value.data_mut()[i] = orig + H as f32;
            let plus = objective(&mut layer, &input, &upstream, forward_seed);
            layer.params_mut()[p].1.value.data_mut()[i] = orig - H as f32;
            let minus = objective(&mut layer, &input, &upstream, forward_seed);
            layer.params_mut()[p].1.value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * H);
            let analytic = layer.params()[p].1.grad.data()[i] as f64;
            max_err = max_err.max(relative_error(analytic, numeric));
        }
    }
    max_err
}

fn run_instances(name: &str, make: impl Fn(&mut RunRng) -> (LayerKind, Vec<usize>, usize), kink_offset: f32) {
    for seed in 0..20u64 {
        let mut rng = seeded(seed.wrapping_mul(977).wrapping_add(13));
        let (kind, in_shape, batch) = make(&mut rng);
        let layer = Layer::new(LayerSpec::new(kind, "t"), &in_shape, &mut seeded(seed)).unwrap();
        assert!(layer.param_count() <= 200, "{name}: instance too large");
        let err = check_layer(layer, batch, seed, kink_offset);
        assert!(
            err < TOLERANCE,
            "{name} seed {seed}: max relative error {err:.2e} >= {TOLERANCE:.0e}"
        );
    }
}

#[test]
fn dense_gradients_match_finite_differences() {
    run_instances(
        "dense",
        |rng| {
            let fan_in = rng.gen_range(3..10usize);
            let units = rng.gen_range(2..8usize);
            (LayerKind::Dense { units }, vec![fan_in], rng.gen_range(1..4usize))
        },
        0.0,
    );
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    run_instances(
        "conv2d",
        |rng| {
            let channels = rng.gen_range(1..4usize);
            let filters = rng.gen_range(1..5usize);
            let stride = rng.gen_range(1..3usize);
            let padding = if rng.gen::<bool>() { Padding::Same } else { Padding::Valid };
            (
                LayerKind::Conv2D { filters, kernel: 3, stride, padding },
                vec![5, 5, channels],
                rng.gen_range(1..3usize),
            )
        },
        0.0,
    );
}

#[test]
fn maxpool_gradients_match_finite_differences() {
    run_instances(
        "maxpool",
        |rng| {
            let channels = rng.gen_range(1..4usize);
            (
                LayerKind::MaxPool2D { window: 2, stride: 2 },
                vec![4, 4, channels],
                rng.gen_range(1..3usize),
            )
        },
        // Ties inside a pooling window flip the argmax under perturbation;
        // spreading values keeps windows unambiguous.
        0.05,
    );
}

#[test]
fn flatten_gradients_match_finite_differences() {
    run_instances("flatten", |_| (LayerKind::Flatten, vec![3, 4, 2], 2), 0.0);
}

#[test]
fn dropout_gradients_match_finite_differences() {
    run_instances(
        "dropout",
        |rng| {
            let width = rng.gen_range(4..20usize);
            (LayerKind::Dropout { rate: 0.4 }, vec![width], rng.gen_range(1..4usize))
        },
        0.0,
    );
}

#[test]
fn batchnorm_gradients_match_finite_differences() {
    run_instances(
        "batchnorm (dense input)",
        |rng| {
            let features = rng.gen_range(2..6usize);
            (LayerKind::BatchNorm, vec![features], rng.gen_range(3..6usize))
        },
        0.0,
    );
    run_instances(
        "batchnorm (conv input)",
        |rng| {
            let channels = rng.gen_range(1..4usize);
            (LayerKind::BatchNorm, vec![3, 3, channels], 2)
        },
        0.0,
    );
}

#[test]
fn relu_gradients_match_finite_differences() {
    run_instances(
        "relu",
        |rng| {
            let width = rng.gen_range(4..16usize);
            (LayerKind::Activation { f: Activation::Relu }, vec![width], rng.gen_range(1..4usize))
        },
        // Keep inputs away from the kink at zero.
        0.05,
    );
}

#[test]
fn softmax_gradients_match_finite_differences() {
    run_instances(
        "softmax",
        |rng| {
            let width = rng.gen_range(2..8usize);
            (
                LayerKind::Activation { f: Activation::Softmax },
                vec![width],
                rng.gen_range(1..4usize),
            )
        },
        0.0,
    );
}

/// The fused softmax + cross-entropy gradient against finite differences of
/// the actual loss through a dense layer.
#[test]
fn fused_loss_gradient_matches_finite_differences() {
    use bwft::loss::{cross_entropy, one_hot};
    use bwft::model::SequentialModel;

    let specs = vec![
        LayerSpec::new(LayerKind::Dense { units: 4 }, "logits"),
        LayerSpec::new(LayerKind::Activation { f: Activation::Softmax }, "softmax"),
    ];
    let mut model = SequentialModel::from_specs(specs, &[6], &mut seeded(3)).unwrap();
    let input = random_tensor(&[3, 6], &mut seeded(4), 0.0);
    let targets = one_hot(&[1, 3, 0], 4);

    let loss_of = |model: &mut SequentialModel, input: &Tensor| -> f64 {
        let probs = model.forward_train(input, &mut seeded(0)).unwrap();
        cross_entropy(&probs, &targets).unwrap().0 as f64
    };

    let probs = model.forward_train(&input, &mut seeded(0)).unwrap();
    let (_, grad) = cross_entropy(&probs, &targets).unwrap();
    model.backward_fused(&grad).unwrap();
    let analytic: Vec<f32> = model.layers()[0].params()[0].1.grad.data().to_vec();

    let mut max_err = 0.0f64;
    for i in 0..analytic.len() {
        let orig = model.layers()[0].params()[0].1.value.data()[i];
        model.layers_mut()[0].params_mut()[0].1.value.data_mut()[i] = orig + H as f32;
        let plus = loss_of(&mut model, &input);
        model.layers_mut()[0].params_mut()[0].1.value.data_mut()[i] = orig - H as f32;
        let minus = loss_of(&mut model, &input);
        model.layers_mut()[0].params_mut()[0].1.value.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * H);
        max_err = max_err.max(relative_error(analytic[i] as f64, numeric));
    }
    assert!(max_err < TOLERANCE, "fused loss gradient error {max_err:.2e}");
}
