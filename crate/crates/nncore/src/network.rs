//! Sequential networks built from a [`LayerSpec`] chain.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, Result};
use crate::kernels::{self, ConvGeom};
use crate::serialize;
use crate::tensor::{Scalar, Tensor};

/// Output-layer weight scale for policy heads. Keeps the initial policy close
/// to uniform (or the initial Gaussian mean close to zero).
const POLICY_HEAD_GAIN: f64 = 0.01;

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Dense {
        units: usize,
    },
    Relu,
    Flatten,
    /// `Q = V + A - mean(A)` from a 1-unit value stream and an
    /// `actions`-unit advantage stream.
    DuelingHead {
        actions: usize,
    },
    /// Linear layer producing unnormalized log-probabilities.
    SoftmaxHead {
        actions: usize,
    },
    /// Linear mean plus a state-independent learnable log-std; output is
    /// `[mean.., log_std..]`.
    GaussianHead {
        dims: usize,
    },
}

impl LayerSpec {
    /// Valid-padding convolution.
    pub fn conv(out_channels: usize, kernel: usize, stride: usize) -> Self {
        LayerSpec::Conv2d {
            out_channels,
            kernel,
            stride,
            pad: 0,
        }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }

    fn tag(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::DuelingHead { .. } => "dueling",
            LayerSpec::SoftmaxHead { .. } => "softmax",
            LayerSpec::GaussianHead { .. } => "gaussian",
        }
    }
}

#[derive(Clone, Debug)]
enum Resolved {
    Conv(ConvGeom),
    Linear { in_dim: usize, units: usize },
    Relu,
    Flatten,
    Dueling { in_dim: usize, actions: usize },
    Gaussian { in_dim: usize, dims: usize },
}

/// Parameters plus the layer chain that interprets them.
#[derive(Clone, Debug)]
pub struct Network<T: Scalar = f32> {
    specs: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    resolved: Vec<Resolved>,
    output_shapes: Vec<Vec<usize>>,
    param_start: Vec<usize>,
    params: Vec<Tensor<T>>,
    names: Vec<String>,
    stamp: u64,
}

/// Cached forward pass for one batch.
#[derive(Clone, Debug)]
pub struct Activations<T: Scalar = f32> {
    stamp: u64,
    batch: usize,
    inputs: Vec<Tensor<T>>,
    cols: Vec<Vec<T>>,
    output: Tensor<T>,
}

impl<T: Scalar> Activations<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    pub fn into_output(self) -> Tensor<T> {
        self.output
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Input tensor seen by each layer, in chain order.
    pub fn layer_inputs(&self) -> &[Tensor<T>] {
        &self.inputs
    }
}

/// One gradient tensor per parameter tensor, same order and shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T: Scalar = f32> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &[Tensor<T>]) -> Self {
        Gradients {
            tensors: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.tensors.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(|t| t.sum_squares()).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }
}

fn uniform_tensor<T: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64(rng.gen_range(-bound..=bound)))
        .collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

impl<T: Scalar> Network<T> {
    /// Builds the chain for per-sample `input_shape` (`[C, H, W]` or `[D]`)
    /// and initializes weights uniformly in `±sqrt(6 / fan_in)` from `seed`.
    pub fn new(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape.to_vec();
        let mut resolved = Vec::with_capacity(specs.len());
        let mut output_shapes = Vec::with_capacity(specs.len());
        let mut param_start = Vec::with_capacity(specs.len());
        let mut params = Vec::new();
        let mut names = Vec::new();

        let flat_dim = |shape: &[usize], what: &str| -> Result<usize> {
            if shape.len() != 1 {
                return Err(NnError::Config(format!(
                    "{what} expects a flat input, got {shape:?} (missing flatten?)"
                )));
            }
            Ok(shape[0])
        };

        for (i, spec) in specs.iter().enumerate() {
            param_start.push(params.len());
            let mut push = |suffix: &str, t: Tensor<T>| {
                names.push(format!("{i}.{}.{suffix}", spec.tag()));
                params.push(t);
            };
            let (layer, out) = match *spec {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    pad,
                } => {
                    if shape.len() != 3 {
                        return Err(NnError::Config(format!(
                            "conv expects [C, H, W] input, got {shape:?}"
                        )));
                    }
                    let g = ConvGeom::new((shape[0], shape[1], shape[2]), out_channels, kernel, stride, pad)?;
                    let bound = (6.0 / g.col_rows() as f64).sqrt();
                    push("weight", uniform_tensor(&mut rng, &[out_channels, shape[0], kernel, kernel], bound));
                    push("bias", Tensor::zeros(&[out_channels]));
                    (Resolved::Conv(g), vec![out_channels, g.out_h, g.out_w])
                }
                LayerSpec::Dense { units } | LayerSpec::SoftmaxHead { actions: units } => {
                    let d = flat_dim(&shape, spec.tag())?;
                    if units == 0 {
                        return Err(NnError::Config(format!("{} with zero units", spec.tag())));
                    }
                    let gain = if matches!(spec, LayerSpec::SoftmaxHead { .. }) {
                        POLICY_HEAD_GAIN
                    } else {
                        1.0
                    };
                    let bound = gain * (6.0 / d as f64).sqrt();
                    push("weight", uniform_tensor(&mut rng, &[units, d], bound));
                    push("bias", Tensor::zeros(&[units]));
                    (Resolved::Linear { in_dim: d, units }, vec![units])
                }
                LayerSpec::Relu => (Resolved::Relu, shape.clone()),
                LayerSpec::Flatten => (Resolved::Flatten, vec![shape.iter().product()]),
                LayerSpec::DuelingHead { actions } => {
                    let d = flat_dim(&shape, "dueling head")?;
                    if actions == 0 {
                        return Err(NnError::Config("dueling head with zero actions".into()));
                    }
                    let bound = (6.0 / d as f64).sqrt();
                    push("value_weight", uniform_tensor(&mut rng, &[1, d], bound));
                    push("value_bias", Tensor::zeros(&[1]));
                    push("adv_weight", uniform_tensor(&mut rng, &[actions, d], bound));
                    push("adv_bias", Tensor::zeros(&[actions]));
                    (Resolved::Dueling { in_dim: d, actions }, vec![actions])
                }
                LayerSpec::GaussianHead { dims } => {
                    let d = flat_dim(&shape, "gaussian head")?;
                    if dims == 0 {
                        return Err(NnError::Config("gaussian head with zero dims".into()));
                    }
                    let bound = POLICY_HEAD_GAIN * (6.0 / d as f64).sqrt();
                    push("mean_weight", uniform_tensor(&mut rng, &[dims, d], bound));
                    push("mean_bias", Tensor::zeros(&[dims]));
                    push("log_std", Tensor::zeros(&[dims]));
                    (Resolved::Gaussian { in_dim: d, dims }, vec![2 * dims])
                }
            };
            resolved.push(layer);
            output_shapes.push(out.clone());
            shape = out;
        }

        Ok(Network {
            specs: specs.to_vec(),
            input_shape: input_shape.to_vec(),
            resolved,
            output_shapes,
            param_start,
            params,
            names,
            stamp: fresh_stamp(),
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample output shape of the last layer.
    pub fn output_shape(&self) -> &[usize] {
        self.output_shapes.last().map(|s| s.as_slice()).unwrap_or(&self.input_shape)
    }

    /// Per-sample output shape of every layer.
    pub fn layer_output_shapes(&self) -> &[Vec<usize>] {
        &self.output_shapes
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    /// Mutable parameter access. Invalidates outstanding activations.
    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        self.stamp = fresh_stamp();
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// Overwrites parameters with those of an identically shaped network.
    pub fn copy_params_from(&mut self, other: &Network<T>) -> Result<()> {
        if self.specs != other.specs || self.input_shape != other.input_shape {
            return Err(NnError::Shape("copy between different architectures".into()));
        }
        self.params.clone_from(&other.params);
        self.stamp = other.stamp;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            specs: self.specs.clone(),
            input_shape: self.input_shape.clone(),
            resolved: self.resolved.clone(),
            output_shapes: self.output_shapes.clone(),
            param_start: self.param_start.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
            names: self.names.clone(),
            stamp: fresh_stamp(),
        }
    }

    fn batch_of(&self, input: &Tensor<T>) -> Result<usize> {
        let shape = input.shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(NnError::Shape(format!(
                "network expects [N, {:?}], got {shape:?}",
                self.input_shape
            )));
        }
        Ok(shape[0])
    }

    /// Batched forward pass. `input` is `[N, ..input_shape]`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Activations<T>> {
        let batch = self.batch_of(input)?;
        let mut inputs = Vec::with_capacity(self.specs.len());
        let mut cols = Vec::with_capacity(self.specs.len());
        let mut x = input.clone();

        for (i, layer) in self.resolved.iter().enumerate() {
            let mut out_shape = vec![batch];
            out_shape.extend_from_slice(&self.output_shapes[i]);
            let p = &self.params[self.param_start[i]..];
            let mut col = Vec::new();
            let y = match layer {
                Resolved::Conv(g) => {
                    let mut y = Tensor::zeros(&out_shape);
                    col = kernels::conv2d_forward(g, batch, x.data(), p[0].data(), p[1].data(), y.data_mut());
                    y
                }
                Resolved::Linear { in_dim, units } => {
                    let mut y = Tensor::zeros(&out_shape);
                    kernels::dense_forward(batch, *in_dim, *units, x.data(), p[0].data(), p[1].data(), y.data_mut());
                    y
                }
                Resolved::Relu => {
                    let data = x.data().iter().map(|&v| if v > T::ZERO { v } else { T::ZERO }).collect();
                    Tensor::from_vec(&out_shape, data)?
                }
                Resolved::Flatten => x.clone().reshape(&out_shape)?,
                Resolved::Dueling { in_dim, actions } => {
                    let (d, a) = (*in_dim, *actions);
                    let mut v = vec![T::ZERO; batch];
                    kernels::dense_forward(batch, d, 1, x.data(), p[0].data(), p[1].data(), &mut v);
                    let mut y = Tensor::zeros(&out_shape);
                    kernels::dense_forward(batch, d, a, x.data(), p[2].data(), p[3].data(), y.data_mut());
                    let inv = T::ONE / T::from_f64(a as f64);
                    for (row, vn) in y.data_mut().chunks_mut(a).zip(&v) {
                        let mean = row.iter().copied().sum::<T>() * inv;
                        row.iter_mut().for_each(|q| *q = *vn + *q - mean);
                    }
                    y
                }
                Resolved::Gaussian { in_dim, dims } => {
                    let (d, k) = (*in_dim, *dims);
                    let mut mean = vec![T::ZERO; batch * k];
                    kernels::dense_forward(batch, d, k, x.data(), p[0].data(), p[1].data(), &mut mean);
                    let mut y = Tensor::zeros(&out_shape);
                    for (n, row) in y.data_mut().chunks_mut(2 * k).enumerate() {
                        row[..k].copy_from_slice(&mean[n * k..(n + 1) * k]);
                        row[k..].copy_from_slice(p[2].data());
                    }
                    y
                }
            };
            inputs.push(std::mem::replace(&mut x, y));
            cols.push(col);
        }

        if !x.all_finite() {
            return Err(NnError::NonFinite("network output"));
        }
        Ok(Activations {
            stamp: self.stamp,
            batch,
            inputs,
            cols,
            output: x,
        })
    }

    /// Backpropagates `out_grad` (shape of the output) through the cached
    /// pass. Returns parameter gradients and, if requested, the gradient with
    /// respect to the network input.
    pub fn backward(
        &self,
        acts: &Activations<T>,
        out_grad: &Tensor<T>,
        need_input_grad: bool,
    ) -> Result<(Gradients<T>, Option<Tensor<T>>)> {
        if acts.stamp != self.stamp || acts.inputs.len() != self.resolved.len() {
            return Err(NnError::StaleActivations);
        }
        if out_grad.shape() != acts.output.shape() {
            return Err(NnError::Shape(format!(
                "output gradient {:?} vs output {:?}",
                out_grad.shape(),
                acts.output.shape()
            )));
        }
        let batch = acts.batch;
        let mut grads = Gradients::zeros_like(&self.params);
        let mut dy = out_grad.clone();

        for i in (0..self.resolved.len()).rev() {
            let x = &acts.inputs[i];
            let want_dx = i > 0 || need_input_grad;
            let p = &self.params[self.param_start[i]..];
            let start = self.param_start[i];
            let dx = match &self.resolved[i] {
                Resolved::Conv(g) => {
                    let (gw, rest) = grads.tensors[start..].split_at_mut(1);
                    let mut dx = want_dx.then(|| Tensor::zeros(x.shape()));
                    kernels::conv2d_backward(
                        g,
                        batch,
                        dy.data(),
                        p[0].data(),
                        &acts.cols[i],
                        gw[0].data_mut(),
                        rest[0].data_mut(),
                        dx.as_mut().map(|t| t.data_mut()),
                    );
                    dx
                }
                Resolved::Linear { in_dim, units } => {
                    let (gw, rest) = grads.tensors[start..].split_at_mut(1);
                    let mut dx = want_dx.then(|| Tensor::zeros(x.shape()));
                    kernels::dense_backward(
                        batch,
                        *in_dim,
                        *units,
                        x.data(),
                        p[0].data(),
                        dy.data(),
                        gw[0].data_mut(),
                        rest[0].data_mut(),
                        dx.as_mut().map(|t| t.data_mut()),
                    );
                    dx
                }
                Resolved::Relu => {
                    let data = x
                        .data()
                        .iter()
                        .zip(dy.data())
                        .map(|(&v, &g)| if v > T::ZERO { g } else { T::ZERO })
                        .collect();
                    Some(Tensor::from_vec(x.shape(), data)?)
                }
                Resolved::Flatten => Some(dy.clone().reshape(x.shape())?),
                Resolved::Dueling { in_dim, actions } => {
                    let (d, a) = (*in_dim, *actions);
                    let inv = T::ONE / T::from_f64(a as f64);
                    let mut dv = vec![T::ZERO; batch];
                    let mut dadv = dy.data().to_vec();
                    for (row, dvn) in dadv.chunks_mut(a).zip(dv.iter_mut()) {
                        let total = row.iter().copied().sum::<T>();
                        *dvn = total;
                        let mean = total * inv;
                        row.iter_mut().for_each(|g| *g -= mean);
                    }
                    let g = &mut grads.tensors[start..start + 4];
                    let (gv, ga) = g.split_at_mut(2);
                    let (gvw, gvb) = gv.split_at_mut(1);
                    let (gaw, gab) = ga.split_at_mut(1);
                    let mut dx_v = want_dx.then(|| vec![T::ZERO; batch * d]);
                    let mut dx_a = want_dx.then(|| vec![T::ZERO; batch * d]);
                    kernels::dense_backward(
                        batch,
                        d,
                        1,
                        x.data(),
                        p[0].data(),
                        &dv,
                        gvw[0].data_mut(),
                        gvb[0].data_mut(),
                        dx_v.as_deref_mut(),
                    );
                    kernels::dense_backward(
                        batch,
                        d,
                        a,
                        x.data(),
                        p[2].data(),
                        &dadv,
                        gaw[0].data_mut(),
                        gab[0].data_mut(),
                        dx_a.as_deref_mut(),
                    );
                    match (dx_v, dx_a) {
                        (Some(mut v), Some(a)) => {
                            v.iter_mut().zip(&a).for_each(|(s, t)| *s += *t);
                            Some(Tensor::from_vec(x.shape(), v)?)
                        }
                        _ => None,
                    }
                }
                Resolved::Gaussian { in_dim, dims } => {
                    let (d, k) = (*in_dim, *dims);
                    let mut dmean = vec![T::ZERO; batch * k];
                    for (n, row) in dy.data().chunks(2 * k).enumerate() {
                        dmean[n * k..(n + 1) * k].copy_from_slice(&row[..k]);
                        for (gl, g) in grads.tensors[start + 2].data_mut().iter_mut().zip(&row[k..]) {
                            *gl += *g;
                        }
                    }
                    let (gw, rest) = grads.tensors[start..].split_at_mut(1);
                    let mut dx = want_dx.then(|| Tensor::zeros(x.shape()));
                    kernels::dense_backward(
                        batch,
                        d,
                        k,
                        x.data(),
                        p[0].data(),
                        &dmean,
                        gw[0].data_mut(),
                        rest[0].data_mut(),
                        dx.as_mut().map(|t| t.data_mut()),
                    );
                    dx
                }
            };
            match dx {
                Some(d) => dy = d,
                None => break,
            }
        }

        if !grads.all_finite() {
            return Err(NnError::NonFinite("gradients"));
        }
        Ok((grads, need_input_grad.then_some(dy)))
    }
}

impl Network<f32> {
    /// Parameter blob in the manifest + little-endian f32 format.
    pub fn to_bytes(&self) -> Vec<u8> {
        serialize::encode(&self.names, &self.params)
    }

    /// Loads parameters saved by [`Network::to_bytes`] into a network of the
    /// same architecture.
    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let loaded = serialize::decode(bytes)?;
        if loaded.len() != self.params.len() {
            return Err(NnError::Format(format!(
                "expected {} tensors, found {}",
                self.params.len(),
                loaded.len()
            )));
        }
        for ((name, tensor), (want_name, want)) in loaded.iter().zip(self.names.iter().zip(&self.params)) {
            if name != want_name || tensor.shape() != want.shape() {
                return Err(NnError::Format(format!(
                    "tensor {name} {:?} does not match {want_name} {:?}",
                    tensor.shape(),
                    want.shape()
                )));
            }
        }
        self.params = loaded.into_iter().map(|(_, t)| t).collect();
        self.stamp = fresh_stamp();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dqn_torso() -> Vec<LayerSpec> {
        vec![
            LayerSpec::conv(32, 8, 4),
            LayerSpec::Relu,
            LayerSpec::conv(64, 4, 2),
            LayerSpec::Relu,
            LayerSpec::conv(64, 3, 1),
            LayerSpec::Relu,
            LayerSpec::Flatten,
        ]
    }

    #[test]
    fn atari_chain_shapes() {
        let net = Network::<f32>::new(&[4, 84, 84], &dqn_torso(), 0).unwrap();
        let shapes = net.layer_output_shapes();
        assert_eq!(shapes[0], vec![32, 20, 20]);
        assert_eq!(shapes[2], vec![64, 9, 9]);
        assert_eq!(shapes[4], vec![64, 7, 7]);
        assert_eq!(net.output_shape(), &[3136]);
    }

    #[test]
    fn dense_without_flatten_is_config_error() {
        let err = Network::<f32>::new(&[1, 4, 4], &[LayerSpec::dense(3)], 0).unwrap_err();
        assert!(matches!(err, NnError::Config(_)));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let net = Network::<f32>::new(&[3], &[LayerSpec::dense(2)], 0).unwrap();
        let x = Tensor::zeros(&[1, 4]);
        assert!(matches!(net.forward(&x), Err(NnError::Shape(_))));
    }

    #[test]
    fn relu_of_nonpositive_is_zero() {
        let net = Network::<f32>::new(&[5], &[LayerSpec::Relu], 0).unwrap();
        let x = Tensor::from_vec(&[1, 5], vec![-1.0, 0.0, -3.5, -0.1, -100.0]).unwrap();
        assert!(net.forward(&x).unwrap().output().data().iter().all(|&v| v == 0.0));
    }

    fn set_dueling(net: &mut Network<f64>, v_bias: f64, adv_bias: &[f64]) {
        let p = net.params_mut();
        p[0].fill(0.0);
        p[1].data_mut()[0] = v_bias;
        p[2].fill(0.0);
        p[3].data_mut().copy_from_slice(adv_bias);
    }

    #[test]
    fn dueling_identical_advantages_give_value() {
        let mut net = Network::<f64>::new(&[4], &[LayerSpec::DuelingHead { actions: 3 }], 1).unwrap();
        set_dueling(&mut net, 0.7, &[1.0, 1.0, 1.0]);
        let x = Tensor::from_vec(&[1, 4], vec![0.3, -0.2, 1.0, 0.5]).unwrap();
        let q = net.forward(&x).unwrap().into_output();
        assert!(q.data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn dueling_shift_properties() {
        let mut net = Network::<f64>::new(&[3], &[LayerSpec::DuelingHead { actions: 4 }], 2).unwrap();
        let x = Tensor::from_vec(&[2, 3], vec![0.1, 0.2, -0.4, 1.0, -1.0, 0.5]).unwrap();
        let base = net.forward(&x).unwrap().into_output();
        // constant added to every advantage leaves Q unchanged
        net.params_mut()[3].data_mut().iter_mut().for_each(|b| *b += 2.5);
        let shifted = net.forward(&x).unwrap().into_output();
        for (a, b) in base.data().iter().zip(shifted.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // constant added to V shifts every Q by that constant
        net.params_mut()[1].data_mut()[0] += 1.25;
        let raised = net.forward(&x).unwrap().into_output();
        for (a, b) in base.data().iter().zip(raised.data()) {
            assert!((b - a - 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_weight_gradient_is_input() {
        let net = Network::<f64>::new(&[3], &[LayerSpec::Dense { units: 2 }], 3).unwrap();
        let x = Tensor::from_vec(&[1, 3], vec![0.5, -2.0, 4.0]).unwrap();
        let acts = net.forward(&x).unwrap();
        // loss = y0
        let g = Tensor::from_vec(&[1, 2], vec![1.0, 0.0]).unwrap();
        let (grads, _) = net.backward(&acts, &g, false).unwrap();
        assert_eq!(&grads.tensors[0].data()[..3], x.data());
        assert!(grads.tensors[0].data()[3..].iter().all(|&v| v == 0.0));
        assert_eq!(grads.tensors[1].data(), &[1.0, 0.0]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let specs = [
            LayerSpec::conv(2, 3, 1),
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::DuelingHead { actions: 3 },
        ];
        let net = Network::<f32>::new(&[1, 5, 5], &specs, 4).unwrap();
        let x = Tensor::full(&[2, 1, 5, 5], 0.5);
        let acts = net.forward(&x).unwrap();
        let (grads, dx) = net.backward(&acts, &Tensor::zeros(&[2, 3]), true).unwrap();
        assert!(grads.tensors.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
        assert!(dx.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_activations_are_rejected() {
        let mut net = Network::<f32>::new(&[2], &[LayerSpec::dense(2)], 5).unwrap();
        let x = Tensor::full(&[1, 2], 1.0);
        let acts = net.forward(&x).unwrap();
        net.params_mut()[0].data_mut()[0] += 1.0;
        let err = net.backward(&acts, &Tensor::full(&[1, 2], 1.0), false).unwrap_err();
        assert!(matches!(err, NnError::StaleActivations));
    }

    #[test]
    fn non_finite_output_is_numeric_error() {
        let mut net = Network::<f32>::new(&[2], &[LayerSpec::dense(1)], 6).unwrap();
        net.params_mut()[1].data_mut()[0] = f32::NAN;
        let err = net.forward(&Tensor::full(&[1, 2], 1.0)).unwrap_err();
        assert!(matches!(err, NnError::NonFinite(_)));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let specs = dqn_torso();
        let a = Network::<f32>::new(&[4, 84, 84], &specs, 9).unwrap();
        let b = Network::<f32>::new(&[4, 84, 84], &specs, 9).unwrap();
        let c = Network::<f32>::new(&[4, 84, 84], &specs, 10).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        let bound = (6.0f32 / 256.0).sqrt();
        assert!(a.params()[0].data().iter().all(|v| v.abs() <= bound));
        assert!(a.params()[1].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_head_log_std_starts_at_zero() {
        let net = Network::<f32>::new(&[3], &[LayerSpec::GaussianHead { dims: 2 }], 0).unwrap();
        let out = net.forward(&Tensor::full(&[1, 3], 1.0)).unwrap().into_output();
        assert_eq!(out.shape(), &[1, 4]);
        assert_eq!(&out.data()[2..], &[0.0, 0.0]);
    }

    #[test]
    fn bytes_round_trip() {
        let specs = [LayerSpec::conv(2, 2, 1), LayerSpec::Flatten, LayerSpec::SoftmaxHead { actions: 3 }];
        let a = Network::<f32>::new(&[1, 3, 3], &specs, 1).unwrap();
        let mut b = Network::<f32>::new(&[1, 3, 3], &specs, 2).unwrap();
        b.load_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(a.to_bytes(), b.to_bytes());

        let mut other = Network::<f32>::new(&[1, 3, 3], &[LayerSpec::Flatten, LayerSpec::dense(3)], 0).unwrap();
        assert!(other.load_bytes(&a.to_bytes()).is_err());
    }
}
