//! Trained generator/critic pair and gray→depth inference.

use envapi::DepthPredictor;
use nncore::ops::resize_nearest_forward;
use nncore::{serialize, Network, Tensor};
use simworld::Frame;

use crate::dataset::DepthPair;
use crate::error::{DepthError, Result};
use crate::unet::{Discriminator, Generator};

pub const DEFAULT_BASE_WIDTH: usize = 32;

#[derive(Clone, Debug)]
pub struct DepthModel {
    pub generator: Generator,
    pub discriminator: Discriminator,
    base: usize,
}

const META: &str = "meta.arch";

impl DepthModel {
    pub fn new(size: (usize, usize), base: usize, seed: u64) -> Result<Self> {
        Ok(DepthModel {
            generator: Generator::new(size, base, seed)?,
            discriminator: Discriminator::new(size, base, seed)?,
            base,
        })
    }

    pub fn input_size(&self) -> (usize, usize) {
        self.generator.input_size()
    }

    pub fn base_width(&self) -> usize {
        self.base
    }

    /// Batched prediction on `[N, 1, H, W]`.
    pub fn predict_batch(&self, gray: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(self.generator.forward(gray)?.output().clone())
    }

    /// Predicts a depth frame. Inputs of another size are resampled to the
    /// model's size and the prediction is resampled back.
    pub fn predict_depth(&self, gray: &Frame) -> Result<Frame> {
        let (h, w) = self.input_size();
        let native = (gray.height, gray.width) == (h, w);
        let input = if native {
            gray.data.clone()
        } else {
            resize_nearest_forward(&gray.data, 1, (gray.height, gray.width), (h, w))
        };
        let out = self.predict_batch(&Tensor::from_vec(&[1, 1, h, w], input)?)?;
        let data = if native {
            out.data().to_vec()
        } else {
            resize_nearest_forward(out.data(), 1, (h, w), (gray.height, gray.width))
        };
        Ok(Frame {
            width: gray.width,
            height: gray.height,
            data,
        })
    }

    fn named_networks(&self) -> Vec<(String, &Network)> {
        let mut nets = Vec::new();
        for (i, n) in self.generator.encoders.iter().enumerate() {
            nets.push((format!("gen.enc{i}"), n));
        }
        for (i, n) in self.generator.decoders.iter().enumerate() {
            nets.push((format!("gen.dec{i}"), n));
        }
        for (i, n) in self.discriminator.convs.iter().enumerate() {
            nets.push((format!("disc.conv{i}"), n));
        }
        nets
    }

    /// Single nncore blob: an architecture tensor followed by every stage's
    /// parameters under a `stage.param` name.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (h, w) = self.input_size();
        let mut names = vec![META.to_string()];
        let mut tensors =
            vec![Tensor::from_vec(&[3], vec![h as f32, w as f32, self.base as f32]).expect("meta shape")];
        for (prefix, net) in self.named_networks() {
            for (name, p) in net.param_names().iter().zip(net.params()) {
                names.push(format!("{prefix}.{name}"));
                tensors.push(p.clone());
            }
        }
        serialize::encode(&names, &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let entries = serialize::decode(bytes)?;
        let (name, meta) = entries
            .first()
            .ok_or_else(|| DepthError::Config("empty depth model file".into()))?;
        if name != META || meta.len() != 3 {
            return Err(DepthError::Config("depth model file lacks an architecture record".into()));
        }
        let m = meta.data();
        let mut model = DepthModel::new((m[0] as usize, m[1] as usize), m[2] as usize, 0)?;
        let mut rest = entries[1..].iter();
        let mut stages: Vec<&mut Network> = model
            .generator
            .networks_mut()
            .chain(model.discriminator.convs.iter_mut())
            .collect();
        let prefixes: Vec<String> = (0..4)
            .map(|i| format!("gen.enc{i}"))
            .chain((0..4).map(|i| format!("gen.dec{i}")))
            .chain((0..3).map(|i| format!("disc.conv{i}")))
            .collect();
        for (net, prefix) in stages.iter_mut().zip(&prefixes) {
            let count = net.params().len();
            let mut names = Vec::with_capacity(count);
            let mut tensors = Vec::with_capacity(count);
            for want in net.param_names().to_vec() {
                let (name, t) = rest
                    .next()
                    .ok_or_else(|| DepthError::Config(format!("depth model file truncated at {prefix}")))?;
                if *name != format!("{prefix}.{want}") {
                    return Err(DepthError::Config(format!("unexpected tensor {name} for {prefix}.{want}")));
                }
                names.push(want);
                tensors.push(t.clone());
            }
            net.load_bytes(&serialize::encode(&names, &tensors))?;
        }
        if rest.next().is_some() {
            return Err(DepthError::Config("depth model file has trailing tensors".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl DepthPredictor for DepthModel {
    fn predict(&self, gray: &Frame) -> Frame {
        self.predict_depth(gray).expect("depth model forward on a well-formed frame")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthEval {
    pub mean_l1: f64,
    pub per_pair: Vec<f64>,
}

/// Per-pixel mean absolute error per pair, then the mean over pairs.
pub fn evaluate_depth(model: &dyn DepthPredictor, pairs: &[DepthPair]) -> Result<DepthEval> {
    if pairs.is_empty() {
        return Err(DepthError::Dataset("evaluation needs at least one pair".into()));
    }
    let per_pair: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let pred = model.predict(&p.gray);
            frame_l1(&pred, &p.depth)
        })
        .collect();
    let mean_l1 = per_pair.iter().sum::<f64>() / per_pair.len() as f64;
    Ok(DepthEval { mean_l1, per_pair })
}

pub fn frame_l1(a: &Frame, b: &Frame) -> f64 {
    assert_eq!(a.data.len(), b.data.len(), "frame sizes differ");
    a.data.iter().zip(&b.data).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>() / a.data.len() as f64
}
