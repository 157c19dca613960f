//! Layer kernels on HWC row-major buffers.
//!
//! Index of pixel `(y, x)`, channel `c` in an `h × w × ch` tensor is
//! `(y * w + x) * ch + c`. Convolutions are cross-correlations (no kernel
//! flip) with kernels laid out `[kh][kw][cin][cout]`.
//!
//! Padding arithmetic, with `k` the kernel size and `s` the stride:
//!
//! | layer           | padding | output size         | leading pad                         |
//! |-----------------|---------|---------------------|-------------------------------------|
//! | conv2d          | same    | `ceil(in / s)`      | `max((out−1)·s + k − in, 0) / 2`    |
//! | conv2d          | valid   | `(in − k) / s + 1`  | 0                                   |
//! | conv2d_transpose| same    | `in · s`            | `max(k − s, 0) / 2`                 |
//! | conv2d_transpose| valid   | `(in − 1) · s + k`  | 0                                   |
//!
//! Odd total padding puts the extra row/column at the trailing edge.

use super::{Activation, BatchNorm, Conv, Padding, Shape};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Output extent and leading pad of a conv2d along one axis.
pub fn conv_geometry(input: usize, kernel: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if input < kernel {
                return Err(Error::ModelValidation(format!(
                    "valid conv with kernel {kernel} on extent {input}"
                )));
            }
            Ok(((input - kernel) / stride + 1, 0))
        }
    }
}

/// Output extent and leading crop of a conv2d_transpose along one axis.
pub fn transpose_geometry(input: usize, kernel: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => (input * stride, kernel.saturating_sub(stride) / 2),
        Padding::Valid => ((input - 1) * stride + kernel, 0),
    }
}

pub fn dense_forward<T: Real>(x: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    let n_out = bias.len();
    out.copy_from_slice(bias);
    for (i, &xi) in x.iter().enumerate() {
        let row = &weight[i * n_out..(i + 1) * n_out];
        for (o, &w) in out.iter_mut().zip(row) {
            *o = *o + xi * w;
        }
    }
}

pub fn dense_backward<T: Real>(gout: &[T], weight: &[T], gin: &mut [T]) {
    let n_out = gout.len();
    for (i, g) in gin.iter_mut().enumerate() {
        let row = &weight[i * n_out..(i + 1) * n_out];
        *g = row.iter().zip(gout).map(|(&w, &go)| w * go).sum();
    }
}

pub fn upsample_forward<T: Real>(x: &[T], shape: Shape, out: &mut [T]) {
    let Shape { height: h, width: w, channels: c } = shape;
    let ow = 2 * w;
    for y in 0..h {
        for xx in 0..w {
            let src = &x[(y * w + xx) * c..(y * w + xx + 1) * c];
            for dy in 0..2 {
                for dx in 0..2 {
                    let o = ((2 * y + dy) * ow + 2 * xx + dx) * c;
                    out[o..o + c].copy_from_slice(src);
                }
            }
        }
    }
}

pub fn upsample_backward<T: Real>(gout: &[T], shape: Shape, gin: &mut [T]) {
    let Shape { height: h, width: w, channels: c } = shape;
    let ow = 2 * w;
    for y in 0..h {
        for xx in 0..w {
            for ch in 0..c {
                let mut acc = T::zero();
                for dy in 0..2 {
                    for dx in 0..2 {
                        acc = acc + gout[((2 * y + dy) * ow + 2 * xx + dx) * c + ch];
                    }
                }
                gin[(y * w + xx) * c + ch] = acc;
            }
        }
    }
}

/// Visits every (output pixel, kernel tap, input pixel) triple of a conv2d.
#[inline]
fn for_each_conv_tap(
    conv_in: Shape,
    conv_out: Shape,
    kernel: usize,
    stride: usize,
    pad: (usize, usize),
    mut f: impl FnMut(usize, usize, usize),
) {
    for oy in 0..conv_out.height {
        for ox in 0..conv_out.width {
            let o = oy * conv_out.width + ox;
            for ky in 0..kernel {
                let iy = (oy * stride + ky) as isize - pad.0 as isize;
                if iy < 0 || iy >= conv_in.height as isize {
                    continue;
                }
                for kx in 0..kernel {
                    let ix = (ox * stride + kx) as isize - pad.1 as isize;
                    if ix < 0 || ix >= conv_in.width as isize {
                        continue;
                    }
                    let i = iy as usize * conv_in.width + ix as usize;
                    f(o, ky * kernel + kx, i);
                }
            }
        }
    }
}

/// Input-pixel × kernel-tap → output-pixel scatter of a conv2d_transpose.
#[inline]
fn for_each_transpose_tap(
    t_in: Shape,
    t_out: Shape,
    kernel: usize,
    stride: usize,
    crop: (usize, usize),
    mut f: impl FnMut(usize, usize, usize),
) {
    for iy in 0..t_in.height {
        for ix in 0..t_in.width {
            let i = iy * t_in.width + ix;
            for ky in 0..kernel {
                let oy = (iy * stride + ky) as isize - crop.0 as isize;
                if oy < 0 || oy >= t_out.height as isize {
                    continue;
                }
                for kx in 0..kernel {
                    let ox = (ix * stride + kx) as isize - crop.1 as isize;
                    if ox < 0 || ox >= t_out.width as isize {
                        continue;
                    }
                    f(i, ky * kernel + kx, oy as usize * t_out.width + ox as usize);
                }
            }
        }
    }
}

fn conv_pads<T: Real>(conv: &Conv<T>, input: Shape) -> (usize, usize) {
    let (_, py) = conv_geometry(input.height, conv.kernel, conv.stride, conv.padding)
        .expect("geometry validated at load");
    let (_, px) = conv_geometry(input.width, conv.kernel, conv.stride, conv.padding)
        .expect("geometry validated at load");
    (py, px)
}

fn transpose_crops<T: Real>(conv: &Conv<T>, input: Shape) -> (usize, usize) {
    let (_, py) = transpose_geometry(input.height, conv.kernel, conv.stride, conv.padding);
    let (_, px) = transpose_geometry(input.width, conv.kernel, conv.stride, conv.padding);
    (py, px)
}

pub fn conv2d_forward<T: Real>(conv: &Conv<T>, x: &[T], input: Shape, output: Shape, out: &mut [T]) {
    let (cin, cout) = (conv.in_channels, conv.out_channels);
    for px in out.chunks_exact_mut(cout) {
        px.copy_from_slice(&conv.bias);
    }
    let pad = conv_pads(conv, input);
    for_each_conv_tap(input, output, conv.kernel, conv.stride, pad, |o, tap, i| {
        let dst = &mut out[o * cout..(o + 1) * cout];
        for ci in 0..cin {
            let xv = x[i * cin + ci];
            let wrow = &conv.weights[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
            for (d, &w) in dst.iter_mut().zip(wrow) {
                *d = *d + xv * w;
            }
        }
    });
}

pub fn conv2d_backward<T: Real>(conv: &Conv<T>, gout: &[T], input: Shape, output: Shape, gin: &mut [T]) {
    let (cin, cout) = (conv.in_channels, conv.out_channels);
    gin.fill(T::zero());
    let pad = conv_pads(conv, input);
    for_each_conv_tap(input, output, conv.kernel, conv.stride, pad, |o, tap, i| {
        let g = &gout[o * cout..(o + 1) * cout];
        for ci in 0..cin {
            let wrow = &conv.weights[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
            let acc: T = wrow.iter().zip(g).map(|(&w, &gv)| w * gv).sum();
            gin[i * cin + ci] = gin[i * cin + ci] + acc;
        }
    });
}

pub fn conv2d_transpose_forward<T: Real>(conv: &Conv<T>, x: &[T], input: Shape, output: Shape, out: &mut [T]) {
    let (cin, cout) = (conv.in_channels, conv.out_channels);
    for px in out.chunks_exact_mut(cout) {
        px.copy_from_slice(&conv.bias);
    }
    let crop = transpose_crops(conv, input);
    for_each_transpose_tap(input, output, conv.kernel, conv.stride, crop, |i, tap, o| {
        let dst = &mut out[o * cout..(o + 1) * cout];
        for ci in 0..cin {
            let xv = x[i * cin + ci];
            let wrow = &conv.weights[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
            for (d, &w) in dst.iter_mut().zip(wrow) {
                *d = *d + xv * w;
            }
        }
    });
}

pub fn conv2d_transpose_backward<T: Real>(conv: &Conv<T>, gout: &[T], input: Shape, output: Shape, gin: &mut [T]) {
    let (cin, cout) = (conv.in_channels, conv.out_channels);
    gin.fill(T::zero());
    let crop = transpose_crops(conv, input);
    for_each_transpose_tap(input, output, conv.kernel, conv.stride, crop, |i, tap, o| {
        let g = &gout[o * cout..(o + 1) * cout];
        for ci in 0..cin {
            let wrow = &conv.weights[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
            let acc: T = wrow.iter().zip(g).map(|(&w, &gv)| w * gv).sum();
            gin[i * cin + ci] = gin[i * cin + ci] + acc;
        }
    });
}

pub fn batchnorm_forward<T: Real>(bn: &BatchNorm<T>, x: &[T], out: &mut [T]) {
    let c = bn.gamma.len();
    for (px_in, px_out) in x.chunks_exact(c).zip(out.chunks_exact_mut(c)) {
        for ch in 0..c {
            px_out[ch] = bn.gamma[ch] * (px_in[ch] - bn.mean[ch]) / (bn.var[ch] + bn.eps).sqrt() + bn.beta[ch];
        }
    }
}

pub fn batchnorm_backward<T: Real>(bn: &BatchNorm<T>, gout: &[T], gin: &mut [T]) {
    let c = bn.gamma.len();
    let scale: Vec<T> = (0..c).map(|ch| bn.gamma[ch] / (bn.var[ch] + bn.eps).sqrt()).collect();
    for (g_out, g_in) in gout.chunks_exact(c).zip(gin.chunks_exact_mut(c)) {
        for ch in 0..c {
            g_in[ch] = g_out[ch] * scale[ch];
        }
    }
}

pub fn activation_forward<T: Real>(act: Activation, x: &[T], out: &mut [T]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o = match act {
            Activation::Relu => v.max(T::zero()),
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-v).exp()),
            Activation::Elu => {
                if v > T::zero() {
                    v
                } else {
                    v.exp_m1()
                }
            }
        };
    }
}

/// Activation derivative. tanh and sigmoid use the forward output, relu and
/// elu use subgradient 0 at exactly 0.
pub fn activation_backward<T: Real>(act: Activation, x: &[T], y: &[T], gout: &[T], gin: &mut [T]) {
    for i in 0..gin.len() {
        let d = match act {
            Activation::Relu => {
                if x[i] > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y[i] * y[i],
            Activation::Sigmoid => y[i] * (T::one() - y[i]),
            Activation::Elu => {
                if x[i] > T::zero() {
                    T::one()
                } else if x[i] < T::zero() {
                    y[i] + T::one()
                } else {
                    T::zero()
                }
            }
        };
        gin[i] = gout[i] * d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_conv_preserves_extent_at_stride_one() {
        for k in 1..8 {
            for n in 1..20 {
                let (out, pad) = conv_geometry(n, k, 1, Padding::Same).unwrap();
                assert_eq!(out, n);
                assert_eq!(pad, (k - 1) / 2);
            }
        }
    }

    #[test]
    fn strided_geometry() {
        assert_eq!(conv_geometry(7, 5, 2, Padding::Same).unwrap(), (4, 2));
        assert_eq!(conv_geometry(28, 5, 2, Padding::Valid).unwrap(), (12, 0));
        assert!(conv_geometry(3, 5, 1, Padding::Valid).is_err());
        assert_eq!(transpose_geometry(4, 5, 2, Padding::Same), (8, 1));
        assert_eq!(transpose_geometry(4, 4, 2, Padding::Same), (8, 1));
        assert_eq!(transpose_geometry(4, 3, 2, Padding::Valid), (9, 0));
    }

    #[test]
    fn upsample_replicates_blocks() {
        let shape = Shape::new(2, 2, 1);
        let x = [1.0f64, 2.0, 3.0, 4.0];
        let mut out = [0.0; 16];
        upsample_forward(&x, shape, &mut out);
        assert_eq!(
            out,
            [1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
        );
        let mut gin = [0.0; 4];
        upsample_backward(&[1.0; 16], shape, &mut gin);
        assert_eq!(gin, [4.0; 4]);
    }

    #[test]
    fn relu_and_elu_subgradient_zero_at_origin() {
        let x = [0.0f64];
        let mut y = [0.0];
        let mut g = [0.0];
        for act in [Activation::Relu, Activation::Elu] {
            activation_forward(act, &x, &mut y);
            activation_backward(act, &x, &y, &[1.0], &mut g);
            assert_eq!(g[0], 0.0);
        }
    }

    #[test]
    fn batchnorm_matches_direct_arithmetic() {
        let bn = BatchNorm {
            gamma: vec![2.0f64, -0.5],
            beta: vec![0.25, 1.0],
            mean: vec![1.0, -3.0],
            var: vec![4.0, 0.0],
            eps: 1e-3,
        };
        let x = [3.0, 2.0, -1.0, -3.0];
        let mut out = [0.0; 4];
        batchnorm_forward(&bn, &x, &mut out);
        let expect = [
            2.0 * (3.0 - 1.0) / (4.001f64).sqrt() + 0.25,
            -0.5 * (2.0 + 3.0) / (0.001f64).sqrt() + 1.0,
            2.0 * (-1.0 - 1.0) / (4.001f64).sqrt() + 0.25,
            1.0,
        ];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
