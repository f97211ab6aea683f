//! Skip-connected encoder/decoder generator and a conditional patch critic,
//! composed from single-conv `nncore` networks plus elementwise ops.

use nncore::ops::{
    concat_channels, leaky_relu_backward, leaky_relu_forward, resize_nearest_backward, resize_nearest_forward,
    sigmoid_backward, sigmoid_forward, split_channels,
};
use nncore::{Activations, Gradients, LayerSpec, Network, Scalar, Tensor};

use crate::error::{DepthError, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

fn conv_stage<T: Scalar>(
    shape: (usize, usize, usize),
    out: usize,
    kernel: usize,
    stride: usize,
    relu: bool,
    seed: u64,
) -> Result<Network<T>> {
    let mut specs = vec![LayerSpec::Conv2d {
        out_channels: out,
        kernel,
        stride,
        pad: 1,
    }];
    if relu {
        specs.push(LayerSpec::Relu);
    }
    Ok(Network::new(&[shape.0, shape.1, shape.2], &specs, seed)?)
}

fn spatial<T: Scalar>(n: &Network<T>) -> (usize, usize, usize) {
    let s = n.output_shape();
    (s[0], s[1], s[2])
}

/// Four stride-2 encoder stages and four decoder stages. Each decoder stage
/// upsamples (nearest) to the matching skip's size, concatenates the skip
/// and applies a 3×3 conv; the last one feeds a sigmoid.
#[derive(Clone, Debug)]
pub struct Generator<T: Scalar = f32> {
    pub encoders: Vec<Network<T>>,
    pub decoders: Vec<Network<T>>,
    input: (usize, usize, usize),
}

pub struct GenForward<T: Scalar> {
    enc: Vec<Activations<T>>,
    dec: Vec<Activations<T>>,
    output: Tensor<T>,
}

impl<T: Scalar> GenForward<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }
}

impl<T: Scalar> Generator<T> {
    /// `size` is `(height, width)` of the single-channel input; encoder widths
    /// are `[base, 2·base, 2·base, 2·base]`.
    pub fn new(size: (usize, usize), base: usize, seed: u64) -> Result<Self> {
        if base == 0 {
            return Err(DepthError::Config("generator base width must be positive".into()));
        }
        let input = (1, size.0, size.1);
        let widths = [base, 2 * base, 2 * base, 2 * base];
        let mut encoders = Vec::new();
        let mut shape = input;
        for (i, &w) in widths.iter().enumerate() {
            let e = conv_stage(shape, w, 3, 2, true, seed + i as u64)?;
            shape = spatial(&e);
            encoders.push(e);
        }
        // skips consumed by decoder k: encoder 2, 1, 0 outputs, then the input
        let mut skips: Vec<(usize, usize, usize)> = encoders[..3].iter().rev().map(spatial).collect();
        skips.push(input);
        let outs = [2 * base, base, base, 1];
        let mut decoders = Vec::new();
        for (k, (&skip, &out)) in skips.iter().zip(&outs).enumerate() {
            let cat = (shape.0 + skip.0, skip.1, skip.2);
            let d = conv_stage(cat, out, 3, 1, k < 3, seed + 10 + k as u64)?;
            shape = spatial(&d);
            decoders.push(d);
        }
        Ok(Generator {
            encoders,
            decoders,
            input,
        })
    }

    pub fn input_size(&self) -> (usize, usize) {
        (self.input.1, self.input.2)
    }

    pub fn networks(&self) -> impl Iterator<Item = &Network<T>> {
        self.encoders.iter().chain(&self.decoders)
    }

    pub fn networks_mut(&mut self) -> impl Iterator<Item = &mut Network<T>> {
        self.encoders.iter_mut().chain(self.decoders.iter_mut())
    }

    pub fn cast<U: Scalar>(&self) -> Generator<U> {
        Generator {
            encoders: self.encoders.iter().map(|n| n.cast()).collect(),
            decoders: self.decoders.iter().map(|n| n.cast()).collect(),
            input: self.input,
        }
    }

    /// `x` is `[N, 1, H, W]`; output is `[N, 1, H, W]` in `[0, 1]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<GenForward<T>> {
        let batch = x.shape()[0];
        let mut enc = Vec::with_capacity(4);
        let mut h = x.clone();
        for e in &self.encoders {
            let a = e.forward(&h)?;
            h = a.output().clone();
            enc.push(a);
        }
        let mut dec: Vec<Activations<T>> = Vec::with_capacity(4);
        for (k, d) in self.decoders.iter().enumerate() {
            let skip = if k < 3 { enc[2 - k].output() } else { x };
            let (sc, sh, sw) = (skip.shape()[1], skip.shape()[2], skip.shape()[3]);
            let (hc, hh, hw) = (h.shape()[1], h.shape()[2], h.shape()[3]);
            let up = resize_nearest_forward(h.data(), batch * hc, (hh, hw), (sh, sw));
            let cat = concat_channels(&up, hc, skip.data(), sc, batch, sh * sw);
            let a = d.forward(&Tensor::from_vec(&[batch, hc + sc, sh, sw], cat)?)?;
            h = a.output().clone();
            dec.push(a);
        }
        let output = Tensor::from_vec(h.shape(), sigmoid_forward(h.data()))?;
        Ok(GenForward { enc, dec, output })
    }

    /// Gradients for every stage (encoders then decoders) given the gradient
    /// of a loss with respect to the sigmoid output, plus the input gradient.
    pub fn backward(&self, f: &GenForward<T>, d_out: &Tensor<T>) -> Result<(Vec<Gradients<T>>, Tensor<T>)> {
        let batch = d_out.shape()[0];
        let mut dh = Tensor::from_vec(d_out.shape(), sigmoid_backward(f.output.data(), d_out.data()))?;
        // gradients flowing into encoder outputs via skips, and into the input
        let mut d_enc: Vec<Option<Tensor<T>>> = vec![None, None, None, None];
        let mut dx: Option<Tensor<T>> = None;
        let mut dec_grads = Vec::with_capacity(4);
        for k in (0..4).rev() {
            let (g, dcat) = self.decoders[k].backward(&f.dec[k], &dh, true)?;
            dec_grads.push(g);
            let dcat = dcat.expect("requested");
            let (ct, sh, sw) = (dcat.shape()[1], dcat.shape()[2], dcat.shape()[3]);
            let prev = if k == 0 { f.enc[3].output() } else { f.dec[k - 1].output() };
            let (hc, hh, hw) = (prev.shape()[1], prev.shape()[2], prev.shape()[3]);
            let sc = ct - hc;
            let (dup, dskip) = split_channels(dcat.data(), hc, sc, batch, sh * sw);
            let dskip = Tensor::from_vec(&[batch, sc, sh, sw], dskip)?;
            if k < 3 {
                d_enc[2 - k] = Some(dskip);
            } else {
                dx = Some(dskip);
            }
            let dprev = resize_nearest_backward(&dup, batch * hc, (hh, hw), (sh, sw));
            dh = Tensor::from_vec(&[batch, hc, hh, hw], dprev)?;
        }
        dec_grads.reverse();
        // dh now holds the gradient at the last encoder output
        let mut enc_grads = Vec::with_capacity(4);
        for i in (0..4).rev() {
            if let Some(skip) = d_enc[i].take() {
                dh.add_assign(&skip);
            }
            let (g, d_in) = self.encoders[i].backward(&f.enc[i], &dh, true)?;
            enc_grads.push(g);
            dh = d_in.expect("requested");
        }
        enc_grads.reverse();
        dh.add_assign(&dx.expect("last decoder consumed the input"));
        enc_grads.extend(dec_grads);
        Ok((enc_grads, dh))
    }
}

/// Three stride-2, 4×4 convs over the channel-concatenated (condition,
/// depth) pair, leaky ReLU between them, producing a grid of patch logits.
#[derive(Clone, Debug)]
pub struct Discriminator<T: Scalar = f32> {
    pub convs: Vec<Network<T>>,
}

pub struct DiscForward<T: Scalar> {
    acts: Vec<Activations<T>>,
    /// Pre-activation outputs of the first two convs.
    pre: Vec<Tensor<T>>,
    output: Tensor<T>,
}

impl<T: Scalar> DiscForward<T> {
    pub fn logits(&self) -> &Tensor<T> {
        &self.output
    }
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(size: (usize, usize), base: usize, seed: u64) -> Result<Self> {
        let mut shape = (2, size.0, size.1);
        let mut convs = Vec::new();
        for (i, &w) in [base, 2 * base, 1].iter().enumerate() {
            let n = Network::new(
                &[shape.0, shape.1, shape.2],
                &[LayerSpec::Conv2d {
                    out_channels: w,
                    kernel: 4,
                    stride: 2,
                    pad: 1,
                }],
                seed + 100 + i as u64,
            )?;
            shape = spatial(&n);
            convs.push(n);
        }
        Ok(Discriminator { convs })
    }

    pub fn patch_grid(&self) -> (usize, usize) {
        let s = self.convs[2].output_shape();
        (s[1], s[2])
    }

    pub fn cast<U: Scalar>(&self) -> Discriminator<U> {
        Discriminator {
            convs: self.convs.iter().map(|n| n.cast()).collect(),
        }
    }

    /// `cond` and `depth` are `[N, 1, H, W]`.
    pub fn forward(&self, cond: &Tensor<T>, depth: &Tensor<T>) -> Result<DiscForward<T>> {
        let s = cond.shape();
        let (batch, hw) = (s[0], s[2] * s[3]);
        let cat = concat_channels(cond.data(), 1, depth.data(), 1, batch, hw);
        let mut h = Tensor::from_vec(&[batch, 2, s[2], s[3]], cat)?;
        let slope = T::from_f64(LEAKY_SLOPE);
        let mut acts = Vec::with_capacity(3);
        let mut pre = Vec::with_capacity(2);
        for (i, c) in self.convs.iter().enumerate() {
            let a = c.forward(&h)?;
            h = if i < 2 {
                let y = a.output();
                pre.push(y.clone());
                Tensor::from_vec(y.shape(), leaky_relu_forward(y.data(), slope))?
            } else {
                a.output().clone()
            };
            acts.push(a);
        }
        Ok(DiscForward { acts, pre, output: h })
    }

    /// Parameter gradients and the gradient with respect to the depth input
    /// channel.
    pub fn backward(&self, f: &DiscForward<T>, d_logits: &Tensor<T>) -> Result<(Vec<Gradients<T>>, Tensor<T>)> {
        let slope = T::from_f64(LEAKY_SLOPE);
        let mut grads = Vec::with_capacity(3);
        let mut dh = d_logits.clone();
        for i in (0..3).rev() {
            if i < 2 {
                let pre = &f.pre[i];
                dh = Tensor::from_vec(pre.shape(), leaky_relu_backward(pre.data(), dh.data(), slope))?;
            }
            let (g, d_in) = self.convs[i].backward(&f.acts[i], &dh, true)?;
            grads.push(g);
            dh = d_in.expect("requested");
        }
        grads.reverse();
        let s = dh.shape().to_vec();
        let (_, d_depth) = split_channels(dh.data(), 1, 1, s[0], s[2] * s[3]);
        Ok((grads, Tensor::from_vec(&[s[0], 1, s[2], s[3]], d_depth)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_round_trips_the_input_size() {
        let g: Generator = Generator::new((84, 84), 32, 0).unwrap();
        let shapes: Vec<Vec<usize>> = g.encoders.iter().map(|n| n.output_shape().to_vec()).collect();
        assert_eq!(shapes, vec![vec![32, 42, 42], vec![64, 21, 21], vec![64, 11, 11], vec![64, 6, 6]]);
        assert_eq!(g.decoders[3].output_shape(), &[1, 84, 84]);
        let g: Generator = Generator::new((32, 32), 4, 0).unwrap();
        let f = g.forward(&Tensor::full(&[2, 1, 32, 32], 0.5)).unwrap();
        assert_eq!(f.output().shape(), &[2, 1, 32, 32]);
        assert!(f.output().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn patch_critic_receptive_field_grid() {
        let d: Discriminator = Discriminator::new((84, 84), 32, 0).unwrap();
        assert_eq!(d.patch_grid(), (10, 10));
    }
}
