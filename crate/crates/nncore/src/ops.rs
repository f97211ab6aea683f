//! Elementwise and reshaping ops for models that do not fit a sequential
//! chain (the skip-connected depth generator and its patch critic).

use crate::tensor::Scalar;

pub fn sigmoid<T: Scalar>(x: T) -> T {
    let v = x.to_f64();
    T::from_f64(if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    })
}

/// Elementwise sigmoid; backward uses the cached output.
pub fn sigmoid_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| sigmoid(v)).collect()
}

pub fn sigmoid_backward<T: Scalar>(y: &[T], dy: &[T]) -> Vec<T> {
    y.iter().zip(dy).map(|(&s, &g)| g * s * (T::ONE - s)).collect()
}

pub fn leaky_relu_forward<T: Scalar>(x: &[T], slope: T) -> Vec<T> {
    x.iter().map(|&v| if v > T::ZERO { v } else { v * slope }).collect()
}

pub fn leaky_relu_backward<T: Scalar>(x: &[T], dy: &[T], slope: T) -> Vec<T> {
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| if v > T::ZERO { g } else { g * slope })
        .collect()
}

#[inline]
fn nearest_src(dst: usize, src_len: usize, dst_len: usize) -> usize {
    (dst * src_len / dst_len).min(src_len - 1)
}

/// Nearest-neighbour resize of `[batch * channels]` planes from `from` to `to`
/// (height, width).
pub fn resize_nearest_forward<T: Scalar>(
    x: &[T],
    planes: usize,
    from: (usize, usize),
    to: (usize, usize),
) -> Vec<T> {
    let (h, w) = from;
    let (oh, ow) = to;
    let mut y = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let plane = &x[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            let row = &plane[nearest_src(oy, h, oh) * w..];
            for ox in 0..ow {
                y.push(row[nearest_src(ox, w, ow)]);
            }
        }
    }
    y
}

pub fn resize_nearest_backward<T: Scalar>(
    dy: &[T],
    planes: usize,
    from: (usize, usize),
    to: (usize, usize),
) -> Vec<T> {
    let (h, w) = from;
    let (oh, ow) = to;
    let mut dx = vec![T::ZERO; planes * h * w];
    for p in 0..planes {
        let plane = &mut dx[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            let sy = nearest_src(oy, h, oh);
            for ox in 0..ow {
                plane[sy * w + nearest_src(ox, w, ow)] += dy[(p * oh + oy) * ow + ox];
            }
        }
    }
    dx
}

/// Concatenates two NCHW batches along the channel axis.
pub fn concat_channels<T: Scalar>(a: &[T], ca: usize, b: &[T], cb: usize, batch: usize, hw: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(batch * (ca + cb) * hw);
    for n in 0..batch {
        out.extend_from_slice(&a[n * ca * hw..(n + 1) * ca * hw]);
        out.extend_from_slice(&b[n * cb * hw..(n + 1) * cb * hw]);
    }
    out
}

/// Inverse of [`concat_channels`] for gradients.
pub fn split_channels<T: Scalar>(x: &[T], ca: usize, cb: usize, batch: usize, hw: usize) -> (Vec<T>, Vec<T>) {
    let mut a = Vec::with_capacity(batch * ca * hw);
    let mut b = Vec::with_capacity(batch * cb * hw);
    for n in 0..batch {
        let s = &x[n * (ca + cb) * hw..(n + 1) * (ca + cb) * hw];
        a.extend_from_slice(&s[..ca * hw]);
        b.extend_from_slice(&s[ca * hw..]);
    }
    (a, b)
}

/// Binary cross-entropy on a logit: returns `(loss, d loss / d logit)`.
pub fn bce_with_logits(logit: f64, target: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p();
    let grad = sigmoid(logit) - target;
    (loss, grad)
}
