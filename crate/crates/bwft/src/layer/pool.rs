//! Max pooling over NHWC tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// What backward needs: the input shape and, per output element, the flat
/// input index that won the max.
#[derive(Debug, Clone)]
pub(crate) struct PoolCache {
    in_shape: Vec<usize>,
    argmax: Vec<u32>,
}

pub(super) fn out_shape(name: &str, in_shape: &[usize], window: usize, stride: usize) -> Result<Vec<usize>> {
    if in_shape.len() != 3 {
        return Err(Error::config(format!(
            "maxpool layer {name} expects [H, W, C] input, got {in_shape:?}"
        )));
    }
    let (h, w, c) = (in_shape[0], in_shape[1], in_shape[2]);
    if h < window || w < window {
        return Err(Error::config(format!(
            "maxpool layer {name}: window {window} does not fit input {h}x{w}"
        )));
    }
    Ok(vec![(h - window) / stride + 1, (w - window) / stride + 1, c])
}

pub(super) fn forward(input: &Tensor, out_shape: &[usize], window: usize, stride: usize) -> (Tensor, PoolCache) {
    let (batch, h, w, c) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    let (oh, ow) = (out_shape[0], out_shape[1]);
    let mut out = Tensor::zeros(&[batch, oh, ow, c]);
    let mut argmax = vec![0u32; batch * oh * ow * c];
    let x = input.data();
    let ov = out.data_mut();

    for b in 0..batch {
        let xbase = b * h * w * c;
        for oy in 0..oh {
            for ox in 0..ow {
                let obase = ((b * oh + oy) * ow + ox) * c;
                for ci in 0..c {
                    let mut best = f32::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for ky in 0..window {
                        let iy = oy * stride + ky;
                        for kx in 0..window {
                            let ix = ox * stride + kx;
                            let idx = xbase + (iy * w + ix) * c + ci;
                            // Strict > keeps the earliest position on ties.
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    ov[obase + ci] = best;
                    argmax[obase + ci] = best_idx as u32;
                }
            }
        }
    }
    (
        out,
        PoolCache {
            in_shape: input.shape().to_vec(),
            argmax,
        },
    )
}

pub(super) fn backward(upstream: &Tensor, cache: &PoolCache) -> Tensor {
    let mut din = Tensor::zeros(&cache.in_shape);
    let dx = din.data_mut();
    for (u, &idx) in upstream.data().iter().zip(&cache.argmax) {
        dx[idx as usize] += u;
    }
    din
}

#[cfg(test)]
mod tests {
    use super::super::{Layer, LayerKind, LayerSpec, Mode};
    use crate::rng::seeded;
    use crate::tensor::Tensor;

    fn pool(window: usize, stride: usize, in_shape: &[usize]) -> Layer {
        Layer::new(
            LayerSpec::new(LayerKind::MaxPool2D { window, stride }, "p"),
            in_shape,
            &mut seeded(0),
        )
        .unwrap()
    }

    #[test]
    fn forward_takes_window_max() {
        let mut l = pool(2, 2, &[2, 2, 1]);
        let x = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[3.0]);
    }

    #[test]
    fn backward_routes_to_argmax() {
        let mut l = pool(2, 2, &[2, 2, 1]);
        let x = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let mut rng = seeded(0);
        l.forward(&x, Mode::Train, true, &mut rng).unwrap();
        let up = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let din = l.backward(&up).unwrap();
        assert_eq!(din.data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn channels_pool_independently() {
        let mut l = pool(2, 2, &[2, 2, 2]);
        let x = Tensor::from_vec(
            &[1, 2, 2, 2],
            vec![1.0, 8.0, 3.0, 5.0, 2.0, 6.0, 4.0, 7.0],
        )
        .unwrap();
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.data(), &[4.0, 8.0]);
    }

    #[test]
    fn window_must_fit() {
        assert!(Layer::new(
            LayerSpec::new(LayerKind::MaxPool2D { window: 3, stride: 3 }, "p"),
            &[2, 2, 1],
            &mut seeded(0)
        )
        .is_err());
    }
}
