//! Batch normalization over the last (channel) axis.
//!
//! A trainable layer normalizes by batch statistics in train mode and folds
//! them into the running buffers with momentum 0.99. A frozen layer behaves
//! like eval in every mode: it normalizes by the stored running statistics
//! and never touches them, so freezing makes the whole layer static.

use super::{Mode, Param};
use crate::tensor::Tensor;

const MOMENTUM: f32 = 0.99;
const EPS: f32 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) enum BnCache {
    /// Normalized by batch statistics; backward must couple through them.
    Batch { xhat: Tensor, inv_std: Vec<f32> },
    /// Normalized by constant running statistics.
    Frozen { xhat: Tensor, inv_std: Vec<f32> },
}

#[allow(clippy::too_many_arguments)]
pub(super) fn forward(
    input: &Tensor,
    gamma: &Param,
    beta: &Param,
    running_mean: &mut Tensor,
    running_var: &mut Tensor,
    cache: &mut Option<BnCache>,
    mode: Mode,
    trainable: bool,
) -> Tensor {
    let channels = *input.shape().last().expect("bn input has a channel axis");
    let n = input.len() / channels;
    let g = gamma.value.data();
    let b = beta.value.data();

    if mode == Mode::Train && trainable {
        let mut mean = vec![0.0f32; channels];
        let mut var = vec![0.0f32; channels];
        for row in input.data().chunks(channels) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f32;
        }
        for row in input.data().chunks(channels) {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(row) {
                let d = x - m;
                *v += d * d;
            }
        }
        for v in &mut var {
            *v /= n as f32;
        }

        let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / (v + EPS).sqrt()).collect();
        let mut xhat = input.clone();
        for row in xhat.data_mut().chunks_mut(channels) {
            for ((x, m), s) in row.iter_mut().zip(&mean).zip(&inv_std) {
                *x = (*x - m) * s;
            }
        }
        let mut out = xhat.clone();
        for row in out.data_mut().chunks_mut(channels) {
            for ((y, gi), bi) in row.iter_mut().zip(g).zip(b) {
                *y = *y * gi + bi;
            }
        }

        for ((r, m), (rv, v)) in running_mean
            .data_mut()
            .iter_mut()
            .zip(&mean)
            .zip(running_var.data_mut().iter_mut().zip(&var))
        {
            *r = MOMENTUM * *r + (1.0 - MOMENTUM) * m;
            *rv = MOMENTUM * *rv + (1.0 - MOMENTUM) * v;
        }

        *cache = Some(BnCache::Batch { xhat, inv_std });
        out
    } else {
        let inv_std: Vec<f32> = running_var
            .data()
            .iter()
            .map(|v| 1.0 / (v + EPS).sqrt())
            .collect();
        let rm = running_mean.data();
        let mut xhat = input.clone();
        for row in xhat.data_mut().chunks_mut(channels) {
            for ((x, m), s) in row.iter_mut().zip(rm).zip(&inv_std) {
                *x = (*x - m) * s;
            }
        }
        let mut out = xhat.clone();
        for row in out.data_mut().chunks_mut(channels) {
            for ((y, gi), bi) in row.iter_mut().zip(g).zip(b) {
                *y = *y * gi + bi;
            }
        }
        if mode == Mode::Train {
            *cache = Some(BnCache::Frozen { xhat, inv_std });
        }
        out
    }
}

pub(super) fn backward(upstream: &Tensor, gamma: &mut Param, beta: &mut Param, cache: BnCache) -> Tensor {
    let channels = gamma.value.len();
    let (xhat, inv_std, coupled) = match &cache {
        BnCache::Batch { xhat, inv_std } => (xhat, inv_std, true),
        BnCache::Frozen { xhat, inv_std } => (xhat, inv_std, false),
    };
    let n = xhat.len() / channels;
    let g = gamma.value.data().to_vec();

    let dgamma = gamma.grad.data_mut();
    dgamma.fill(0.0);
    let dbeta = beta.grad.data_mut();
    dbeta.fill(0.0);
    let mut sum_dxhat = vec![0.0f32; channels];
    let mut sum_dxhat_xhat = vec![0.0f32; channels];

    for (urow, xrow) in upstream.data().chunks(channels).zip(xhat.data().chunks(channels)) {
        for ci in 0..channels {
            let u = urow[ci];
            let xh = xrow[ci];
            dgamma[ci] += u * xh;
            dbeta[ci] += u;
            let dxh = u * g[ci];
            sum_dxhat[ci] += dxh;
            sum_dxhat_xhat[ci] += dxh * xh;
        }
    }

    let mut din = upstream.clone();
    if coupled {
        let inv_n = 1.0 / n as f32;
        for (drow, xrow) in din.data_mut().chunks_mut(channels).zip(xhat.data().chunks(channels)) {
            for ci in 0..channels {
                let dxh = drow[ci] * g[ci];
                drow[ci] = inv_std[ci]
                    * (dxh - inv_n * sum_dxhat[ci] - xrow[ci] * inv_n * sum_dxhat_xhat[ci]);
            }
        }
    } else {
        for drow in din.data_mut().chunks_mut(channels) {
            for ci in 0..channels {
                drow[ci] *= g[ci] * inv_std[ci];
            }
        }
    }
    din
}
