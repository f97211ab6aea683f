//! Alternating critic/generator optimisation on a [`PairDataset`].

use nncore::ops::bce_with_logits;
use nncore::{AdamConfig, AdamState, Gradients, Network, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DepthPair, PairDataset};
use crate::error::{DepthError, Result};
use crate::model::{DepthModel, DEFAULT_BASE_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GanMode {
    Adversarial,
    L1Only,
}

impl GanMode {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "adversarial" => Some(GanMode::Adversarial),
            "l1_only" => Some(GanMode::L1Only),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GanMode::Adversarial => "adversarial",
            GanMode::L1Only => "l1_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanTrainConfig {
    pub epochs: usize,
    pub lambda_l1: f64,
    pub lr: f64,
    pub beta1: f64,
    pub batch: usize,
    pub mode: GanMode,
    /// First encoder width; later stages use up to twice this.
    pub base: usize,
    pub seed: u64,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        GanTrainConfig {
            epochs: 20,
            lambda_l1: 100.0,
            lr: 2e-4,
            beta1: 0.5,
            batch: 8,
            mode: GanMode::Adversarial,
            base: DEFAULT_BASE_WIDTH,
            seed: 0,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DepthError::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("depth epochs must be at least 1");
        }
        if !self.lambda_l1.is_finite() || self.lambda_l1 < 0.0 {
            return bad("lambda_l1 must be a finite non-negative number");
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return bad("depth lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1 must lie in [0, 1)");
        }
        if self.batch == 0 || self.base == 0 {
            return bad("batch and base width must be positive");
        }
        Ok(())
    }
}

/// Training-set means for one epoch, measured on the forward passes that
/// produced that epoch's updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLosses {
    pub epoch: usize,
    pub l1: f64,
    /// Generator adversarial term; 0 in `l1_only` mode.
    pub gen_adv: f64,
    pub disc: f64,
}

pub struct DepthTraining {
    pub model: DepthModel,
    pub losses: Vec<EpochLosses>,
    /// Set when a non-finite loss or gradient stopped training; `model` then
    /// holds the parameters from the start of the failing epoch.
    pub diverged: Option<DepthError>,
}

/// Mean absolute error and its gradient with respect to `pred`.
pub fn l1_loss(pred: &[f32], target: &[f32]) -> (f64, Vec<f32>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = (*p - *t) as f64;
            loss += d.abs();
            (d.signum() * (d != 0.0) as u8 as f64 / n) as f32
        })
        .collect();
    (loss / n, grad)
}

/// Mean binary cross-entropy over all logits against one label.
pub fn bce_mean(logits: &[f32], label: f64) -> (f64, Vec<f32>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .map(|z| {
            let (l, g) = bce_with_logits(*z as f64, label);
            loss += l;
            (g / n) as f32
        })
        .collect();
    (loss / n, grad)
}

struct Optimizers {
    gen: Vec<AdamState>,
    disc: Vec<AdamState>,
}

fn apply(nets: &mut [&mut Network], opts: &mut [AdamState], grads: &[Gradients]) -> Result<()> {
    for ((net, opt), g) in nets.iter_mut().zip(opts).zip(grads) {
        opt.step(net.params_mut(), g)?;
    }
    Ok(())
}

fn batch_tensors(pairs: &[&DepthPair], size: (usize, usize)) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let shape = [pairs.len(), 1, size.0, size.1];
    let x = pairs.iter().flat_map(|p| p.gray.data.iter().copied()).collect();
    let y = pairs.iter().flat_map(|p| p.depth.data.iter().copied()).collect();
    Ok((Tensor::from_vec(&shape, x)?, Tensor::from_vec(&shape, y)?))
}

fn finite(what: &str, v: f64, epoch: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DepthError::Diverged {
            epoch,
            what: format!("{what} loss is {v}"),
        })
    }
}

fn train_step(
    model: &mut DepthModel,
    opt: &mut Optimizers,
    x: &Tensor<f32>,
    y: &Tensor<f32>,
    cfg: &GanTrainConfig,
    epoch: usize,
) -> Result<(f64, f64, f64)> {
    let gf = model.generator.forward(x)?;
    let fake = gf.output().clone();
    let (l1, l1_grad) = l1_loss(fake.data(), y.data());
    finite("l1", l1, epoch)?;
    let lambda = cfg.lambda_l1 as f32;
    let mut d_out: Vec<f32> = l1_grad.iter().map(|g| g * lambda).collect();
    let (mut gen_adv, mut disc_loss) = (0.0, 0.0);
    if cfg.mode == GanMode::Adversarial {
        let disc = &model.discriminator;
        let real = disc.forward(x, y)?;
        let fake_f = disc.forward(x, &fake)?;
        let (lr, gr) = bce_mean(real.logits().data(), 1.0);
        let (lf, gfk) = bce_mean(fake_f.logits().data(), 0.0);
        disc_loss = finite("discriminator", 0.5 * (lr + lf), epoch)?;
        let half = |g: Vec<f32>, like: &Tensor<f32>| Tensor::from_vec(like.shape(), g.into_iter().map(|v| 0.5 * v).collect());
        let (mut grads, _) = disc.backward(&real, &half(gr, real.logits())?)?;
        let (gfake, _) = disc.backward(&fake_f, &half(gfk, fake_f.logits())?)?;
        for (a, b) in grads.iter_mut().zip(&gfake) {
            a.add(b);
        }
        let mut nets: Vec<&mut Network> = model.discriminator.convs.iter_mut().collect();
        apply(&mut nets, &mut opt.disc, &grads)?;

        let again = model.discriminator.forward(x, &fake)?;
        let (la, ga) = bce_mean(again.logits().data(), 1.0);
        gen_adv = finite("generator adversarial", la, epoch)?;
        let ga = Tensor::from_vec(again.logits().shape(), ga)?;
        let (_, d_fake) = model.discriminator.backward(&again, &ga)?;
        for (d, a) in d_out.iter_mut().zip(d_fake.data()) {
            *d += a;
        }
    }
    let d_out = Tensor::from_vec(fake.shape(), d_out)?;
    let (grads, _) = model.generator.backward(&gf, &d_out)?;
    let mut nets: Vec<&mut Network> = model.generator.networks_mut().collect();
    apply(&mut nets, &mut opt.gen, &grads)?;
    Ok((l1, gen_adv, disc_loss))
}

/// Trains on the dataset's train split. Divergence is reported in the
/// returned value rather than as an error so callers keep the last finite
/// parameters.
pub fn train_depth(dataset: &PairDataset, cfg: &GanTrainConfig) -> Result<DepthTraining> {
    cfg.validate()?;
    let size = dataset
        .frame_size()
        .ok_or_else(|| DepthError::Dataset("cannot train on an empty dataset".into()))?;
    let train = dataset.train();
    let mut model = DepthModel::new(size, cfg.base, cfg.seed)?;
    let adam = AdamConfig {
        lr: cfg.lr,
        beta1: cfg.beta1,
        ..AdamConfig::default()
    };
    let mut opt = Optimizers {
        gen: model.generator.networks().map(|n| AdamState::new(n.params(), adam)).collect(),
        disc: model.discriminator.convs.iter().map(|n| AdamState::new(n.params(), adam)).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let snapshot = (model.clone(), opt.gen.clone(), opt.disc.clone());
        order.shuffle(&mut rng);
        let mut sums = (0.0, 0.0, 0.0);
        let mut failure = None;
        for chunk in order.chunks(cfg.batch) {
            let pairs: Vec<&DepthPair> = chunk.iter().map(|&i| &train[i]).collect();
            let (x, y) = batch_tensors(&pairs, size)?;
            match train_step(&mut model, &mut opt, &x, &y, cfg, epoch) {
                Ok((l1, adv, d)) => {
                    let w = chunk.len() as f64;
                    sums.0 += l1 * w;
                    sums.1 += adv * w;
                    sums.2 += d * w;
                }
                Err(e) => {
                    failure = Some(match e {
                        DepthError::Nn(nn) => DepthError::Diverged {
                            epoch,
                            what: nn.to_string(),
                        },
                        other => other,
                    });
                    break;
                }
            }
        }
        if let Some(e) = failure {
            model = snapshot.0;
            return Ok(DepthTraining {
                model,
                losses,
                diverged: Some(e),
            });
        }
        let n = train.len() as f64;
        losses.push(EpochLosses {
            epoch,
            l1: sums.0 / n,
            gen_adv: sums.1 / n,
            disc: sums.2 / n,
        });
    }
    Ok(DepthTraining {
        model,
        losses,
        diverged: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_of_exact_prediction_is_zero() {
        let y = vec![0.1, 0.5, 1.0];
        let (l, g) = l1_loss(&y, &y);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn l1_constant_case() {
        let (l, g) = l1_loss(&[0.5; 4], &[1.0; 4]);
        assert!((l - 0.5).abs() < 1e-12);
        assert!(g.iter().all(|v| (*v + 0.25).abs() < 1e-7));
    }

    #[test]
    fn bce_at_even_odds() {
        let (real, _) = bce_mean(&[0.0; 6], 1.0);
        let (fake, _) = bce_mean(&[0.0; 6], 0.0);
        assert!((real - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((real + fake - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(GanTrainConfig::default().validate().is_ok());
        for bad in [
            GanTrainConfig { epochs: 0, ..Default::default() },
            GanTrainConfig { lambda_l1: -1.0, ..Default::default() },
            GanTrainConfig { batch: 0, ..Default::default() },
            GanTrainConfig { lr: f64::NAN, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(train_depth(&PairDataset::new(vec![]), &GanTrainConfig::default()).is_err());
    }
}
