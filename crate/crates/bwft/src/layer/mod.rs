//! Layer library: specs, parameter state, and forward/backward passes.
//!
//! Seven layer kinds cover everything the miniature backbones and the
//! classifier head need. A layer is weighted (carries optimizer-visible
//! parameters) exactly when its kind is `Dense`, `Conv2D`, or `BatchNorm`;
//! everything else is a non-weighting layer and acts as a block delimiter
//! during segmentation.
//!
//! Forward passes operate on batched tensors: a layer configured for
//! per-sample shape `[H, W, C]` accepts `[B, H, W, C]`. In train mode each
//! layer caches what its backward pass needs; calling `backward` without a
//! preceding train-mode `forward` is a usage error.

mod batchnorm;
mod conv;
mod pool;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RunRng;
use crate::tensor::Tensor;

pub(crate) use batchnorm::BnCache;
pub(crate) use pool::PoolCache;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    Same,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Dense {
        units: usize,
    },
    Conv2D {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    },
    MaxPool2D {
        window: usize,
        stride: usize,
    },
    Flatten,
    Dropout {
        rate: f32,
    },
    BatchNorm,
    Activation {
        f: Activation,
    },
}

impl LayerKind {
    /// True exactly for the parameter-carrying kinds.
    pub fn weighted(&self) -> bool {
        matches!(
            self,
            LayerKind::Dense { .. } | LayerKind::Conv2D { .. } | LayerKind::BatchNorm
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv2D { .. } => "conv2d",
            LayerKind::MaxPool2D { .. } => "maxpool2d",
            LayerKind::Flatten => "flatten",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::Activation { f: Activation::Relu } => "relu",
            LayerKind::Activation {
                f: Activation::Softmax,
            } => "softmax",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LayerKind::Dense { units } if units == 0 => {
                Err(Error::config("dense units must be positive"))
            }
            LayerKind::Conv2D { filters, kernel, stride, .. }
                if filters == 0 || kernel == 0 || stride == 0 =>
            {
                Err(Error::config("conv filters/kernel/stride must be positive"))
            }
            LayerKind::MaxPool2D { window, stride } if window == 0 || stride == 0 => {
                Err(Error::config("pool window/stride must be positive"))
            }
            LayerKind::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                Err(Error::config(format!("dropout rate {rate} outside [0,1)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub name: String,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, name: impl Into<String>) -> LayerSpec {
        LayerSpec {
            kind,
            name: name.into(),
        }
    }

    /// Stable textual form, used for architecture fingerprints.
    pub fn descriptor(&self) -> String {
        let kind = match &self.kind {
            LayerKind::Dense { units } => format!("dense({units})"),
            LayerKind::Conv2D {
                filters,
                kernel,
                stride,
                padding,
            } => format!(
                "conv2d({filters},{kernel},{stride},{})",
                match padding {
                    Padding::Valid => "valid",
                    Padding::Same => "same",
                }
            ),
            LayerKind::MaxPool2D { window, stride } => format!("maxpool2d({window},{stride})"),
            LayerKind::Flatten => "flatten".to_string(),
            LayerKind::Dropout { rate } => format!("dropout({rate})"),
            LayerKind::BatchNorm => "batchnorm".to_string(),
            LayerKind::Activation { f: Activation::Relu } => "relu".to_string(),
            LayerKind::Activation {
                f: Activation::Softmax,
            } => "softmax".to_string(),
        };
        format!("{}:{}", self.name, kind)
    }
}

/// A parameter tensor together with the gradient slot the backward pass fills.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    fn new(value: Tensor) -> Param {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub(crate) enum State {
    Dense {
        w: Param,
        b: Param,
        cache: Option<Tensor>,
    },
    Conv {
        kernel: Param,
        bias: Param,
        cache: Option<Tensor>,
    },
    MaxPool {
        cache: Option<PoolCache>,
    },
    Flatten {
        cache: Option<Vec<usize>>,
    },
    Dropout {
        cache: Option<Vec<f32>>,
    },
    BatchNorm {
        gamma: Param,
        beta: Param,
        running_mean: Tensor,
        running_var: Tensor,
        cache: Option<BnCache>,
    },
    Activation {
        cache: Option<Tensor>,
    },
}

/// A spec plus its live state, bound to a concrete per-sample input shape.
#[derive(Debug, Clone)]
pub struct Layer {
    spec: LayerSpec,
    state: State,
    in_shape: Vec<usize>,
    out_shape: Vec<usize>,
}

fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut RunRng) -> Tensor {
    let limit = (6.0 / fan_in as f32).sqrt();
    let dist = Uniform::new(-limit, limit);
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = dist.sample(rng);
    }
    t
}

impl Layer {
    /// Builds a layer for the given per-sample input shape, initializing any
    /// parameters from `rng` (He-uniform weights, zero biases).
    pub fn new(spec: LayerSpec, in_shape: &[usize], rng: &mut RunRng) -> Result<Layer> {
        spec.kind.validate()?;
        let (state, out_shape) = match spec.kind {
            LayerKind::Dense { units } => {
                if in_shape.len() != 1 {
                    return Err(Error::config(format!(
                        "dense layer {} expects flat input, got {:?}",
                        spec.name, in_shape
                    )));
                }
                let fan_in = in_shape[0];
                let w = Param::new(he_uniform(&[fan_in, units], fan_in, rng));
                let b = Param::new(Tensor::zeros(&[units]));
                (State::Dense { w, b, cache: None }, vec![units])
            }
            LayerKind::Conv2D {
                filters,
                kernel,
                stride,
                padding,
            } => {
                let (state, out) =
                    conv::build(&spec.name, in_shape, filters, kernel, stride, padding, rng)?;
                (state, out)
            }
            LayerKind::MaxPool2D { window, stride } => {
                let out = pool::out_shape(&spec.name, in_shape, window, stride)?;
                (State::MaxPool { cache: None }, out)
            }
            LayerKind::Flatten => {
                let flat: usize = in_shape.iter().product();
                (State::Flatten { cache: None }, vec![flat])
            }
            LayerKind::Dropout { .. } => (State::Dropout { cache: None }, in_shape.to_vec()),
            LayerKind::BatchNorm => {
                let channels = *in_shape.last().ok_or_else(|| {
                    Error::config(format!("batchnorm {} needs a channel axis", spec.name))
                })?;
                (
                    State::BatchNorm {
                        gamma: Param::new(Tensor::filled(&[channels], 1.0)),
                        beta: Param::new(Tensor::zeros(&[channels])),
                        running_mean: Tensor::zeros(&[channels]),
                        running_var: Tensor::filled(&[channels], 1.0),
                        cache: None,
                    },
                    in_shape.to_vec(),
                )
            }
            LayerKind::Activation { .. } => (State::Activation { cache: None }, in_shape.to_vec()),
        };
        Ok(Layer {
            spec,
            state,
            in_shape: in_shape.to_vec(),
            out_shape,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn weighted(&self) -> bool {
        self.spec.kind.weighted()
    }

    pub fn in_shape(&self) -> &[usize] {
        &self.in_shape
    }

    pub fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }

    /// Optimizer-visible parameters, in a stable order.
    pub fn params(&self) -> Vec<(&'static str, &Param)> {
        match &self.state {
            State::Dense { w, b, .. } => vec![("weights", w), ("bias", b)],
            State::Conv { kernel, bias, .. } => vec![("weights", kernel), ("bias", bias)],
            State::BatchNorm { gamma, beta, .. } => vec![("gamma", gamma), ("beta", beta)],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Param)> {
        match &mut self.state {
            State::Dense { w, b, .. } => vec![("weights", w), ("bias", b)],
            State::Conv { kernel, bias, .. } => vec![("weights", kernel), ("bias", bias)],
            State::BatchNorm { gamma, beta, .. } => vec![("gamma", gamma), ("beta", beta)],
            _ => vec![],
        }
    }

    /// Non-trainable running statistics (batch-norm only).
    pub fn buffers(&self) -> Vec<(&'static str, &Tensor)> {
        match &self.state {
            State::BatchNorm {
                running_mean,
                running_var,
                ..
            } => vec![("running_mean", running_mean), ("running_var", running_var)],
            _ => vec![],
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match &mut self.state {
            State::BatchNorm {
                running_mean,
                running_var,
                ..
            } => vec![("running_mean", running_mean), ("running_var", running_var)],
            _ => vec![],
        }
    }

    /// Total trainable parameter elements (0 for non-weighting layers).
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.value.len()).sum()
    }

    fn check_batched_input(&self, input: &Tensor) -> Result<usize> {
        let shape = input.shape();
        if shape.len() != self.in_shape.len() + 1 || shape[1..] != self.in_shape[..] {
            return Err(Error::config(format!(
                "layer {} expects batched input [N, {:?}], got {:?}",
                self.spec.name, self.in_shape, shape
            )));
        }
        Ok(shape[0])
    }

    /// Forward pass over a batch.
    ///
    /// `trainable` matters only for batch-norm: a frozen batch-norm layer uses
    /// its stored running statistics in every mode and leaves them untouched,
    /// while a trainable one normalizes by batch statistics in train mode and
    /// updates the running buffers with momentum 0.99.
    pub fn forward(
        &mut self,
        input: &Tensor,
        mode: Mode,
        trainable: bool,
        rng: &mut RunRng,
    ) -> Result<Tensor> {
        let batch = self.check_batched_input(input)?;
        let out = match (&self.spec.kind, &mut self.state) {
            (LayerKind::Dense { units }, State::Dense { w, b, cache }) => {
                let out = dense_forward(input, &w.value, &b.value, batch, *units);
                if mode == Mode::Train {
                    *cache = Some(input.clone());
                }
                out
            }
            (
                LayerKind::Conv2D { filters, kernel, stride, padding },
                State::Conv { kernel: k, bias, cache },
            ) => {
                let out = conv::forward(
                    input,
                    &k.value,
                    &bias.value,
                    &self.out_shape,
                    *filters,
                    *kernel,
                    *stride,
                    *padding,
                );
                if mode == Mode::Train {
                    *cache = Some(input.clone());
                }
                out
            }
            (LayerKind::MaxPool2D { window, stride }, State::MaxPool { cache }) => {
                let (out, pc) = pool::forward(input, &self.out_shape, *window, *stride);
                if mode == Mode::Train {
                    *cache = Some(pc);
                }
                out
            }
            (LayerKind::Flatten, State::Flatten { cache }) => {
                if mode == Mode::Train {
                    *cache = Some(input.shape().to_vec());
                }
                let flat: usize = self.out_shape.iter().product();
                input.clone().reshaped(&[batch, flat])?
            }
            (LayerKind::Dropout { rate }, State::Dropout { cache }) => match mode {
                Mode::Eval => input.clone(),
                Mode::Train => {
                    let keep_scale = 1.0 / (1.0 - rate);
                    let mut mask = vec![0.0f32; input.len()];
                    let mut out = input.clone();
                    for (m, v) in mask.iter_mut().zip(out.data_mut()) {
                        // Inverted scaling: eval-mode forward is the identity.
                        if rng.gen::<f32>() >= *rate {
                            *m = keep_scale;
                            *v *= keep_scale;
                        } else {
                            *m = 0.0;
                            *v = 0.0;
                        }
                    }
                    *cache = Some(mask);
                    out
                }
            },
            (LayerKind::BatchNorm, State::BatchNorm { gamma, beta, running_mean, running_var, cache }) => {
                batchnorm::forward(
                    input, gamma, beta, running_mean, running_var, cache, mode, trainable,
                )
            }
            (LayerKind::Activation { f }, State::Activation { cache }) => match f {
                Activation::Relu => {
                    let mut out = input.clone();
                    for v in out.data_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                    if mode == Mode::Train {
                        *cache = Some(input.clone());
                    }
                    out
                }
                Activation::Softmax => {
                    let out = softmax(input);
                    if mode == Mode::Train {
                        *cache = Some(out.clone());
                    }
                    out
                }
            },
            _ => unreachable!("spec kind and state always agree"),
        };
        if !out.all_finite() {
            return Err(Error::numeric(format!(
                "layer {} produced a non-finite output",
                self.spec.name
            )));
        }
        Ok(out)
    }

    /// Backward pass: consumes the cached activations from the previous
    /// train-mode forward, fills this layer's parameter gradients, and returns
    /// the gradient with respect to the input.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        if upstream.shape().len() != self.out_shape.len() + 1
            || upstream.shape()[1..] != self.out_shape[..]
        {
            return Err(Error::config(format!(
                "layer {} expects upstream gradient [N, {:?}], got {:?}",
                self.spec.name,
                self.out_shape,
                upstream.shape()
            )));
        }
        let batch = upstream.shape()[0];
        let missing =
            || Error::usage(format!("backward before train-mode forward on layer {}", self.spec.name));
        match (&self.spec.kind, &mut self.state) {
            (LayerKind::Dense { units }, State::Dense { w, b, cache }) => {
                let input = cache.take().ok_or_else(missing)?;
                Ok(dense_backward(&input, upstream, w, b, batch, *units))
            }
            (
                LayerKind::Conv2D { filters, kernel, stride, padding },
                State::Conv { kernel: k, bias, cache },
            ) => {
                let input = cache.take().ok_or_else(missing)?;
                Ok(conv::backward(
                    &input, upstream, k, bias, *filters, *kernel, *stride, *padding,
                ))
            }
            (LayerKind::MaxPool2D { .. }, State::MaxPool { cache }) => {
                let pc = cache.take().ok_or_else(missing)?;
                Ok(pool::backward(upstream, &pc))
            }
            (LayerKind::Flatten, State::Flatten { cache }) => {
                let in_shape = cache.take().ok_or_else(missing)?;
                upstream.clone().reshaped(&in_shape)
            }
            (LayerKind::Dropout { .. }, State::Dropout { cache }) => {
                let mask = cache.take().ok_or_else(missing)?;
                let mut grad = upstream.clone();
                for (g, m) in grad.data_mut().iter_mut().zip(&mask) {
                    *g *= m;
                }
                Ok(grad)
            }
            (LayerKind::BatchNorm, State::BatchNorm { gamma, beta, cache, .. }) => {
                let bn_cache = cache.take().ok_or_else(missing)?;
                Ok(batchnorm::backward(upstream, gamma, beta, bn_cache))
            }
            (LayerKind::Activation { f }, State::Activation { cache }) => {
                let cached = cache.take().ok_or_else(missing)?;
                match f {
                    Activation::Relu => {
                        let mut grad = upstream.clone();
                        for (g, x) in grad.data_mut().iter_mut().zip(cached.data()) {
                            if *x <= 0.0 {
                                *g = 0.0;
                            }
                        }
                        Ok(grad)
                    }
                    Activation::Softmax => Ok(softmax_backward(&cached, upstream)),
                }
            }
            _ => unreachable!("spec kind and state always agree"),
        }
    }
}

fn dense_forward(input: &Tensor, w: &Tensor, b: &Tensor, batch: usize, units: usize) -> Tensor {
    let fan_in = w.shape()[0];
    let mut out = Tensor::zeros(&[batch, units]);
    let x = input.data();
    let wv = w.data();
    let bv = b.data();
    let ov = out.data_mut();
    for bi in 0..batch {
        let row = &mut ov[bi * units..(bi + 1) * units];
        row.copy_from_slice(bv);
        let xrow = &x[bi * fan_in..(bi + 1) * fan_in];
        for (f, &xf) in xrow.iter().enumerate() {
            let wrow = &wv[f * units..(f + 1) * units];
            for (o, wf) in row.iter_mut().zip(wrow) {
                *o += xf * wf;
            }
        }
    }
    out
}

fn dense_backward(
    input: &Tensor,
    upstream: &Tensor,
    w: &mut Param,
    b: &mut Param,
    batch: usize,
    units: usize,
) -> Tensor {
    let fan_in = w.value.shape()[0];
    let mut din = Tensor::zeros(input.shape());
    let x = input.data();
    let up = upstream.data();
    let wv = w.value.data();
    let dw = w.grad.data_mut();
    dw.fill(0.0);
    let db = b.grad.data_mut();
    db.fill(0.0);
    let dx = din.data_mut();
    for bi in 0..batch {
        let urow = &up[bi * units..(bi + 1) * units];
        for (o, &u) in urow.iter().enumerate() {
            db[o] += u;
        }
        let xrow = &x[bi * fan_in..(bi + 1) * fan_in];
        let dxrow = &mut dx[bi * fan_in..(bi + 1) * fan_in];
        for f in 0..fan_in {
            let wrow = &wv[f * units..(f + 1) * units];
            let dwrow = &mut dw[f * units..(f + 1) * units];
            let xf = xrow[f];
            let mut acc = 0.0f32;
            for (o, (&u, wf)) in urow.iter().zip(wrow).enumerate() {
                dwrow[o] += xf * u;
                acc += u * wf;
            }
            dxrow[f] = acc;
        }
    }
    din
}

/// Row-wise softmax over the last axis, shifted by the row max.
pub fn softmax(input: &Tensor) -> Tensor {
    let width = *input.shape().last().expect("softmax input has an axis");
    let mut out = input.clone();
    for row in out.data_mut().chunks_mut(width) {
        let max = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Full softmax Jacobian product: dx = y * (g - sum(g*y)) per row.
fn softmax_backward(output: &Tensor, upstream: &Tensor) -> Tensor {
    let width = *output.shape().last().expect("softmax output has an axis");
    let mut grad = upstream.clone();
    for (grow, yrow) in grad.data_mut().chunks_mut(width).zip(output.data().chunks(width)) {
        let dot: f32 = grow.iter().zip(yrow).map(|(g, y)| g * y).sum();
        for (g, y) in grow.iter_mut().zip(yrow) {
            *g = y * (*g - dot);
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn layer(kind: LayerKind, in_shape: &[usize], seed: u64) -> Layer {
        Layer::new(LayerSpec::new(kind, "t"), in_shape, &mut seeded(seed)).unwrap()
    }

    #[test]
    fn relu_forward_matches_definition() {
        let mut l = layer(LayerKind::Activation { f: Activation::Relu }, &[2], 0);
        let x = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]).unwrap();
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut l = layer(LayerKind::Activation { f: Activation::Softmax }, &[2], 0);
        let x = Tensor::from_vec(&[1, 2], vec![0.0, 0.0]).unwrap();
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
    }

    #[test]
    fn dense_affine_map_example() {
        let mut l = layer(LayerKind::Dense { units: 1 }, &[2], 0);
        let (_, w) = &mut l.params_mut()[0];
        w.value.data_mut().copy_from_slice(&[2.0, 3.0]);
        let (_, b) = &mut l.params_mut()[1];
        b.value.data_mut()[0] = 0.5;
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.data(), &[5.5]);
    }

    #[test]
    fn dense_backward_grads_match_hand_values() {
        let mut l = layer(LayerKind::Dense { units: 1 }, &[2], 0);
        l.params_mut()[0].1.value.data_mut().copy_from_slice(&[2.0, 3.0]);
        l.params_mut()[1].1.value.data_mut()[0] = 0.5;
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        let mut rng = seeded(0);
        l.forward(&x, Mode::Train, true, &mut rng).unwrap();
        let up = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
        let din = l.backward(&up).unwrap();
        assert_eq!(din.data(), &[2.0, 3.0]);
        assert_eq!(l.params()[0].1.grad.data(), &[1.0, 1.0]);
        assert_eq!(l.params()[1].1.grad.data(), &[1.0]);
    }

    #[test]
    fn relu_backward_masks_negative_inputs() {
        let mut l = layer(LayerKind::Activation { f: Activation::Relu }, &[2], 0);
        let x = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]).unwrap();
        let mut rng = seeded(0);
        l.forward(&x, Mode::Train, true, &mut rng).unwrap();
        let up = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(l.backward(&up).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn backward_before_forward_is_a_usage_error() {
        let mut l = layer(LayerKind::Activation { f: Activation::Relu }, &[2], 0);
        let up = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        assert!(matches!(l.backward(&up), Err(Error::Usage(_))));
    }

    #[test]
    fn eval_forward_does_not_arm_backward() {
        let mut l = layer(LayerKind::Activation { f: Activation::Relu }, &[2], 0);
        let x = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]).unwrap();
        l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        let up = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        assert!(l.backward(&up).is_err());
    }

    #[test]
    fn dropout_eval_is_identity_and_train_scales() {
        let mut l = layer(LayerKind::Dropout { rate: 0.5 }, &[64], 1);
        let x = Tensor::filled(&[2, 64], 1.0);
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(3)).unwrap();
        assert!(y.bit_eq(&x));

        let yt = l.forward(&x, Mode::Train, true, &mut seeded(3)).unwrap();
        let mut kept = 0usize;
        for v in yt.data() {
            assert!(*v == 0.0 || *v == 2.0);
            if *v != 0.0 {
                kept += 1;
            }
        }
        assert!(kept > 0 && kept < yt.len());

        // Same seed draws the same mask.
        let yt2 = l.forward(&x, Mode::Train, true, &mut seeded(3)).unwrap();
        assert!(yt.bit_eq(&yt2));
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let mut l = layer(LayerKind::Dense { units: 3 }, &[4], 0);
        let x = Tensor::zeros(&[2, 5]);
        assert!(matches!(
            l.forward(&x, Mode::Eval, true, &mut seeded(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn non_finite_output_is_a_numeric_error() {
        let mut l = layer(LayerKind::Dense { units: 1 }, &[1], 0);
        l.params_mut()[0].1.value.data_mut()[0] = f32::MAX;
        let x = Tensor::from_vec(&[1, 1], vec![f32::MAX]).unwrap();
        assert!(matches!(
            l.forward(&x, Mode::Eval, true, &mut seeded(0)),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn weighted_flag_per_kind() {
        assert!(LayerKind::Dense { units: 1 }.weighted());
        assert!(LayerKind::BatchNorm.weighted());
        assert!(LayerKind::Conv2D {
            filters: 1,
            kernel: 1,
            stride: 1,
            padding: Padding::Valid
        }
        .weighted());
        assert!(!LayerKind::Flatten.weighted());
        assert!(!LayerKind::MaxPool2D { window: 2, stride: 2 }.weighted());
        assert!(!LayerKind::Dropout { rate: 0.5 }.weighted());
        assert!(!LayerKind::Activation { f: Activation::Relu }.weighted());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut rng = seeded(0);
        assert!(Layer::new(
            LayerSpec::new(LayerKind::Dropout { rate: 1.0 }, "d"),
            &[4],
            &mut rng
        )
        .is_err());
        assert!(Layer::new(
            LayerSpec::new(LayerKind::Dense { units: 0 }, "d"),
            &[4],
            &mut rng
        )
        .is_err());
    }
}
