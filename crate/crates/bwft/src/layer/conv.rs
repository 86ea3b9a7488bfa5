//! 2D convolution over NHWC tensors with HWIO kernels.
//!
//! Forward and backward lower each sample to an im2col patch matrix and run
//! tight accumulation loops over contiguous rows; the HWIO kernel layout is
//! already the row-major `[K*K*Cin, Cout]` matrix the product needs.

use super::{he_uniform, Padding, Param, State};
use crate::error::{Error, Result};
use crate::rng::RunRng;
use crate::tensor::Tensor;

pub(super) fn build(
    name: &str,
    in_shape: &[usize],
    filters: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
    rng: &mut RunRng,
) -> Result<(State, Vec<usize>)> {
    if in_shape.len() != 3 {
        return Err(Error::config(format!(
            "conv layer {name} expects [H, W, C] input, got {in_shape:?}"
        )));
    }
    let (h, w, c) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = out_hw(h, w, kernel, stride, padding).ok_or_else(|| {
        Error::config(format!(
            "conv layer {name}: kernel {kernel} does not fit input {h}x{w} with stride {stride}"
        ))
    })?;
    let fan_in = kernel * kernel * c;
    let k = Param::new(he_uniform(&[kernel, kernel, c, filters], fan_in, rng));
    let bias = Param::new(Tensor::zeros(&[filters]));
    Ok((
        State::Conv {
            kernel: k,
            bias,
            cache: None,
        },
        vec![oh, ow, filters],
    ))
}

fn out_hw(h: usize, w: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => {
            if h < kernel || w < kernel {
                return None;
            }
            Some(((h - kernel) / stride + 1, (w - kernel) / stride + 1))
        }
        Padding::Same => Some((h.div_ceil(stride), w.div_ceil(stride))),
    }
}

/// Top/left padding so that `Same` output is centred on the input.
fn pad_offsets(
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> (isize, isize) {
    match padding {
        Padding::Valid => (0, 0),
        Padding::Same => {
            let pad_h = ((oh - 1) * stride + kernel).saturating_sub(h);
            let pad_w = ((ow - 1) * stride + kernel).saturating_sub(w);
            ((pad_h / 2) as isize, (pad_w / 2) as isize)
        }
    }
}

struct Geometry {
    h: usize,
    w: usize,
    c: usize,
    oh: usize,
    ow: usize,
    kernel: usize,
    stride: usize,
    pad_top: isize,
    pad_left: isize,
    /// K*K*Cin, the patch row width.
    patch: usize,
}

impl Geometry {
    fn of(input: &Tensor, oh: usize, ow: usize, kernel: usize, stride: usize, padding: Padding) -> Geometry {
        let (h, w, c) = (input.shape()[1], input.shape()[2], input.shape()[3]);
        let (pad_top, pad_left) = pad_offsets(h, w, oh, ow, kernel, stride, padding);
        Geometry { h, w, c, oh, ow, kernel, stride, pad_top, pad_left, patch: kernel * kernel * c }
    }

    /// Flat input offset of patch row element `(ky, kx)` for output `(oy, ox)`;
    /// `None` when the tap lands in the padding.
    #[inline]
    fn tap(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky) as isize - self.pad_top;
        let ix = (ox * self.stride + kx) as isize - self.pad_left;
        if iy < 0 || iy >= self.h as isize || ix < 0 || ix >= self.w as isize {
            None
        } else {
            Some((iy as usize * self.w + ix as usize) * self.c)
        }
    }
}

/// Gathers one sample into the `[oh*ow, patch]` im2col matrix (padding taps
/// stay zero).
fn im2col(xb: &[f32], g: &Geometry, patches: &mut [f32]) {
    patches.fill(0.0);
    let mut row_start = 0usize;
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let row = &mut patches[row_start..row_start + g.patch];
            let mut dst = 0usize;
            for ky in 0..g.kernel {
                for kx in 0..g.kernel {
                    if let Some(src) = g.tap(oy, ox, ky, kx) {
                        row[dst..dst + g.c].copy_from_slice(&xb[src..src + g.c]);
                    }
                    dst += g.c;
                }
            }
            row_start += g.patch;
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn forward(
    input: &Tensor,
    kernel_t: &Tensor,
    bias: &Tensor,
    out_shape: &[usize],
    filters: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Tensor {
    let batch = input.shape()[0];
    let (oh, ow) = (out_shape[0], out_shape[1]);
    let g = Geometry::of(input, oh, ow, kernel, stride, padding);
    let sample_in = g.h * g.w * g.c;
    let sample_out = oh * ow * filters;

    let mut out = Tensor::zeros(&[batch, oh, ow, filters]);
    let mut patches = vec![0.0f32; oh * ow * g.patch];
    let w_t = transpose(kernel_t.data(), g.patch, filters);
    let x = input.data();
    let ov = out.data_mut();

    for b in 0..batch {
        im2col(&x[b * sample_in..(b + 1) * sample_in], &g, &mut patches);
        let ob = &mut ov[b * sample_out..(b + 1) * sample_out];
        // O[m][n] = bias[n] + P[m] . Wt[n], long dots over the patch width.
        for (prow, orow) in patches.chunks_exact(g.patch).zip(ob.chunks_exact_mut(filters)) {
            for ((o, bv), wrow) in orow.iter_mut().zip(bias.data()).zip(w_t.chunks_exact(g.patch)) {
                *o = bv + dot(prow, wrow);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(super) fn backward(
    input: &Tensor,
    upstream: &Tensor,
    kernel_p: &mut Param,
    bias_p: &mut Param,
    filters: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Tensor {
    let batch = input.shape()[0];
    let (oh, ow) = (upstream.shape()[1], upstream.shape()[2]);
    let g = Geometry::of(input, oh, ow, kernel, stride, padding);
    let sample_in = g.h * g.w * g.c;
    let sample_out = oh * ow * filters;
    let m = oh * ow;

    let mut din = Tensor::zeros(input.shape());
    let x = input.data();
    let up = upstream.data();
    let w_t = transpose(kernel_p.value.data(), g.patch, filters);
    let dk = kernel_p.grad.data_mut();
    dk.fill(0.0);
    let db = bias_p.grad.data_mut();
    db.fill(0.0);
    let dx = din.data_mut();

    let mut patches = vec![0.0f32; m * g.patch];
    let mut patches_t = vec![0.0f32; m * g.patch];
    let mut up_t = vec![0.0f32; m * filters];
    let mut dpatches = vec![0.0f32; m * g.patch];

    for b in 0..batch {
        let xb = &x[b * sample_in..(b + 1) * sample_in];
        let ub = &up[b * sample_out..(b + 1) * sample_out];
        let dxb = &mut dx[b * sample_in..(b + 1) * sample_in];

        im2col(xb, &g, &mut patches);
        transpose_into(&patches, m, g.patch, &mut patches_t);
        transpose_into(ub, m, filters, &mut up_t);

        // db[n] += sum_m U[m][n]
        for (d, urow) in db.iter_mut().zip(up_t.chunks_exact(m)) {
            *d += urow.iter().sum::<f32>();
        }
        // dW[k][n] += Pt[k] . Ut[n], long dots over the output positions.
        for (ptrow, dkrow) in patches_t.chunks_exact(m).zip(dk.chunks_exact_mut(filters)) {
            for (dkv, utrow) in dkrow.iter_mut().zip(up_t.chunks_exact(m)) {
                *dkv += dot(ptrow, utrow);
            }
        }
        // dP[m] = sum_n U[m][n] * Wt[n], long accumulations over the patch width.
        dpatches.fill(0.0);
        for (urow, dprow) in ub.chunks_exact(filters).zip(dpatches.chunks_exact_mut(g.patch)) {
            for (u, wrow) in urow.iter().zip(w_t.chunks_exact(g.patch)) {
                let u = *u;
                for (dp, wv) in dprow.iter_mut().zip(wrow) {
                    *dp += u * wv;
                }
            }
        }

        // col2im: scatter patch gradients back onto the input.
        let mut row_start = 0usize;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let dprow = &dpatches[row_start..row_start + g.patch];
                let mut src = 0usize;
                for ky in 0..g.kernel {
                    for kx in 0..g.kernel {
                        if let Some(dst) = g.tap(oy, ox, ky, kx) {
                            for (dxv, dpv) in dxb[dst..dst + g.c].iter_mut().zip(&dprow[src..src + g.c]) {
                                *dxv += dpv;
                            }
                        }
                        src += g.c;
                    }
                }
                row_start += g.patch;
            }
        }
    }
    din
}

/// Dot product with 16 explicit partial sums so the reduction vectorizes
/// without reassociation ambiguity; bit-deterministic for a given length.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    const LANES: usize = 16;
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for (arow, brow) in a
        .chunks_exact(LANES)
        .zip(b.chunks_exact(LANES))
        .take(chunks)
    {
        for ((s, av), bv) in acc.iter_mut().zip(arow).zip(brow) {
            *s += av * bv;
        }
    }
    let mut total = 0.0f32;
    for s in acc {
        total += s;
    }
    for (av, bv) in a[chunks * LANES..].iter().zip(&b[chunks * LANES..]) {
        total += av * bv;
    }
    total
}

fn transpose(src: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; src.len()];
    transpose_into(src, rows, cols, &mut out);
    out
}

fn transpose_into(src: &[f32], rows: usize, cols: usize, out: &mut [f32]) {
    for (r, row) in src.chunks_exact(cols).enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[c * rows + r] = *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Layer, LayerKind, LayerSpec, Mode, Padding};
    use crate::rng::seeded;
    use crate::tensor::Tensor;

    fn conv(filters: usize, kernel: usize, stride: usize, padding: Padding, in_shape: &[usize]) -> Layer {
        Layer::new(
            LayerSpec::new(
                LayerKind::Conv2D {
                    filters,
                    kernel,
                    stride,
                    padding,
                },
                "c",
            ),
            in_shape,
            &mut seeded(0),
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input_channel() {
        // One 1x1 filter with weight 1 on channel 0 copies that channel.
        let mut l = conv(1, 1, 1, Padding::Valid, &[2, 2, 2]);
        {
            let (_, k) = &mut l.params_mut()[0];
            k.value.data_mut().copy_from_slice(&[1.0, 0.0]);
        }
        let x = Tensor::from_vec(&[1, 2, 2, 2], vec![1.0, 9.0, 2.0, 9.0, 3.0, 9.0, 4.0, 9.0]).unwrap();
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 1]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn output_shapes_for_valid_and_same_padding() {
        let l = conv(4, 3, 1, Padding::Valid, &[5, 5, 2]);
        assert_eq!(l.out_shape(), &[3, 3, 4]);
        let l2 = conv(4, 3, 2, Padding::Same, &[5, 5, 2]);
        assert_eq!(l2.out_shape(), &[3, 3, 4]);
        let l3 = conv(4, 3, 1, Padding::Same, &[5, 5, 2]);
        assert_eq!(l3.out_shape(), &[5, 5, 4]);
    }

    #[test]
    fn same_padding_sums_in_bounds_window() {
        // 3x3 all-ones kernel on a 3x3 single-channel input of ones: corner
        // outputs see 4 pixels, edges 6, centre 9.
        let mut l = conv(1, 3, 1, Padding::Same, &[3, 3, 1]);
        l.params_mut()[0].1.value.data_mut().fill(1.0);
        let x = Tensor::filled(&[1, 3, 3, 1], 1.0);
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn strided_conv_picks_correct_taps() {
        // 2x2 identity-ish kernel (top-left tap only) with stride 2 samples
        // the even grid positions.
        let mut l = conv(1, 2, 2, Padding::Valid, &[4, 4, 1]);
        let mut k = vec![0.0; 4];
        k[0] = 1.0;
        l.params_mut()[0].1.value.data_mut().copy_from_slice(&k);
        let x = Tensor::from_vec(&[1, 4, 4, 1], (0..16).map(|v| v as f32).collect()).unwrap();
        let y = l.forward(&x, Mode::Eval, true, &mut seeded(0)).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 8.0, 10.0]);
    }

    #[test]
    fn kernel_larger_than_input_rejected() {
        let r = Layer::new(
            LayerSpec::new(
                LayerKind::Conv2D {
                    filters: 1,
                    kernel: 4,
                    stride: 1,
                    padding: Padding::Valid,
                },
                "c",
            ),
            &[3, 3, 1],
            &mut seeded(0),
        );
        assert!(r.is_err());
    }
}
