//! Batched convolution and dense kernels on raw slices.
//!
//! Layout is NCHW for images and `[batch, features]` for vectors. Convolution
//! lowers each sample to an im2col matrix of shape
//! `[in_c * k * k, out_h * out_w]` and multiplies by the `[out_c, in_c * k * k]`
//! weight matrix. The column buffers are returned so the backward pass can
//! reuse them.

use crate::error::{NnError, Result};
use crate::tensor::Scalar;

/// Spatial output size of a strided convolution with symmetric zero padding.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || input + 2 * pad < kernel {
        return None;
    }
    Some((input + 2 * pad - kernel) / stride + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(
        (in_c, in_h, in_w): (usize, usize, usize),
        out_c: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        let bad = || {
            NnError::Config(format!(
                "conv k={kernel} s={stride} p={pad} does not fit input {in_c}x{in_h}x{in_w}"
            ))
        };
        if in_c == 0 || out_c == 0 {
            return Err(bad());
        }
        let out_h = conv_output_size(in_h, kernel, stride, pad).ok_or_else(bad)?;
        let out_w = conv_output_size(in_w, kernel, stride, pad).ok_or_else(bad)?;
        Ok(ConvGeom {
            in_c,
            in_h,
            in_w,
            out_c,
            kernel,
            stride,
            pad,
            out_h,
            out_w,
        })
    }

    pub fn col_rows(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn in_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.out_c * self.positions()
    }
}

fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let p = g.positions();
    let k = g.kernel;
    for c in 0..g.in_c {
        let plane = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let out = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let dst = &mut out[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.in_h as isize {
                        dst.iter_mut().for_each(|v| *v = T::ZERO);
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.in_w as isize {
                            T::ZERO
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let p = g.positions();
    let k = g.kernel;
    for c in 0..g.in_c {
        let plane = &mut dx[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            dst[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Forward convolution over a batch. Returns the per-sample im2col buffers
/// concatenated (`batch * col_rows * positions` values).
pub fn conv2d_forward<T: Scalar>(
    g: &ConvGeom,
    batch: usize,
    x: &[T],
    weight: &[T],
    bias: &[T],
    y: &mut [T],
) -> Vec<T> {
    let kc = g.col_rows();
    let p = g.positions();
    let mut cols = vec![T::ZERO; batch * kc * p];
    for n in 0..batch {
        let xs = &x[n * g.in_len()..(n + 1) * g.in_len()];
        let cs = &mut cols[n * kc * p..(n + 1) * kc * p];
        im2col(xs, g, cs);
        let ys = &mut y[n * g.out_len()..(n + 1) * g.out_len()];
        for (oc, row) in ys.chunks_mut(p).enumerate() {
            row.iter_mut().for_each(|v| *v = bias[oc]);
        }
        T::gemm(g.out_c, kc, p, T::ONE, weight, false, cs, false, T::ONE, ys);
    }
    cols
}

/// Backward convolution. Accumulates into `dweight`/`dbias`; writes `dx`
/// (overwriting) when requested.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    g: &ConvGeom,
    batch: usize,
    dy: &[T],
    weight: &[T],
    cols: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    dx: Option<&mut [T]>,
) {
    let kc = g.col_rows();
    let p = g.positions();
    for n in 0..batch {
        let dys = &dy[n * g.out_len()..(n + 1) * g.out_len()];
        let cs = &cols[n * kc * p..(n + 1) * kc * p];
        T::gemm(g.out_c, p, kc, T::ONE, dys, false, cs, true, T::ONE, dweight);
        for (oc, row) in dys.chunks(p).enumerate() {
            dbias[oc] += row.iter().copied().sum::<T>();
        }
    }
    if let Some(dx) = dx {
        dx.iter_mut().for_each(|v| *v = T::ZERO);
        let mut dcols = vec![T::ZERO; kc * p];
        for n in 0..batch {
            let dys = &dy[n * g.out_len()..(n + 1) * g.out_len()];
            T::gemm(kc, g.out_c, p, T::ONE, weight, true, dys, false, T::ZERO, &mut dcols);
            col2im(&dcols, g, &mut dx[n * g.in_len()..(n + 1) * g.in_len()]);
        }
    }
}

/// `y[n, u] = sum_d x[n, d] * w[u, d] + b[u]`.
pub fn dense_forward<T: Scalar>(
    batch: usize,
    in_dim: usize,
    units: usize,
    x: &[T],
    weight: &[T],
    bias: &[T],
    y: &mut [T],
) {
    for row in y.chunks_mut(units) {
        row.copy_from_slice(bias);
    }
    T::gemm(batch, in_dim, units, T::ONE, x, false, weight, true, T::ONE, y);
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Scalar>(
    batch: usize,
    in_dim: usize,
    units: usize,
    x: &[T],
    weight: &[T],
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    dx: Option<&mut [T]>,
) {
    T::gemm(units, batch, in_dim, T::ONE, dy, true, x, false, T::ONE, dweight);
    for row in dy.chunks(units) {
        for (b, g) in dbias.iter_mut().zip(row) {
            *b += *g;
        }
    }
    if let Some(dx) = dx {
        T::gemm(batch, units, in_dim, T::ONE, dy, false, weight, false, T::ZERO, dx);
    }
}
