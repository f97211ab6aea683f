//! Proximal policy optimization with a clipped surrogate, generalized
//! advantage estimation and a shared convolutional torso.

use envapi::{Action, Env};
use nncore::dist::{gaussian_entropy, sample_gaussian};
use nncore::{
    entropy_categorical, gaussian_logprob, log_softmax, sample_categorical, AdamConfig, AdamState, Gradients,
    LayerSpec, Network, Tensor,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simworld::SpawnMode;

use crate::codec::{Reader, Writer};
use crate::dqn::argmax;
use crate::error::{AgentError, Result};
use crate::EpisodeTracker;

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Total transitions per update, split evenly across workers.
    pub horizon: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub max_grad_norm: f64,
    /// Remaining epochs are skipped once the approximate KL exceeds this.
    pub kl_cap: f64,
    /// Keep the Gaussian log-std at its initial value.
    pub fixed_sigma: bool,
    /// Multiplies rewards before advantage and value-target computation.
    pub reward_scale: f64,
    pub workers: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 64,
            horizon: 2048,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 2.5e-4,
            max_grad_norm: 0.5,
            kl_cap: 0.5,
            fixed_sigma: false,
            reward_scale: 1.0,
            workers: 1,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("ppo.gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("ppo.lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("ppo.clip must lie in (0, 1)");
        }
        if self.minibatch == 0 || self.horizon == 0 || self.workers == 0 {
            return bad("ppo.minibatch, ppo.horizon and ppo.workers must be positive");
        }
        if !self.horizon.is_multiple_of(self.workers) {
            return bad("ppo.horizon must be divisible by ppo.workers");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || self.max_grad_norm <= 0.0 {
            return bad("ppo.lr must be non-negative and ppo.max_grad_norm positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.reward_scale <= 0.0 {
            return bad("ppo loss coefficients must be non-negative and reward_scale positive");
        }
        Ok(())
    }
}

/// Generalized advantage estimation. `values` has one more entry than
/// `rewards`: the bootstrap value of the state after the last step.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(values.len(), rewards.len() + 1, "gae needs a bootstrap value");
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

/// `min(r·Â, clip(r, 1−ε, 1+ε)·Â)`.
pub fn clipped_surrogate(ratio: f64, adv: f64, clip: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - clip, 1.0 + clip) * adv)
}

/// Derivative of [`clipped_surrogate`] with respect to the log-probability
/// (the ratio's own derivative is the ratio). Zero where the clipped branch
/// is the minimum.
pub fn clipped_surrogate_grad(ratio: f64, adv: f64, clip: f64) -> f64 {
    if ratio * adv <= ratio.clamp(1.0 - clip, 1.0 + clip) * adv {
        ratio * adv
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Categorical(usize),
    Gaussian(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    /// Argmax for categorical policies, the mean for Gaussian ones.
    Greedy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActOutput {
    pub action: Action,
    pub logp: f64,
    pub value: f64,
}

/// Log-probability of `action` under one row of policy-head output.
pub fn log_prob<T: nncore::Scalar>(kind: PolicyKind, head_row: &[T], action: &Action) -> Result<f64> {
    match (kind, action) {
        (PolicyKind::Categorical(n), Action::Discrete(a)) if *a < n => Ok(log_softmax(head_row)[*a]),
        (PolicyKind::Gaussian(d), Action::Continuous(z)) if d == 2 => {
            let mean: Vec<f64> = head_row[..d].iter().map(|v| v.to_f64()).collect();
            let ls: Vec<f64> = head_row[d..].iter().map(|v| v.to_f64()).collect();
            Ok(gaussian_logprob(&mean, &ls, &z[..]))
        }
        _ => Err(AgentError::Config(format!("action {action:?} does not match policy {kind:?}"))),
    }
}

/// Shared torso with separate policy and value heads.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub torso: Network,
    pub policy: Network,
    pub value: Network,
    pub kind: PolicyKind,
}

pub struct Forward {
    torso: nncore::Activations,
    policy: nncore::Activations,
    value: nncore::Activations,
}

impl Forward {
    pub fn head(&self) -> &Tensor {
        self.policy.output()
    }

    pub fn values(&self) -> &Tensor {
        self.value.output()
    }
}

impl ActorCritic {
    pub fn new(state_shape: &[usize], torso: &[LayerSpec], kind: PolicyKind, seed: u64) -> Result<Self> {
        let torso = Network::new(state_shape, torso, seed)?;
        let feat = torso.output_shape().to_vec();
        if feat.len() != 1 {
            return Err(AgentError::Config(format!("torso must end in a feature vector, got {feat:?}")));
        }
        let head = match kind {
            PolicyKind::Categorical(n) => LayerSpec::SoftmaxHead { actions: n },
            PolicyKind::Gaussian(d) => LayerSpec::GaussianHead { dims: d },
        };
        let policy = Network::new(&feat, &[head], seed.wrapping_add(1))?;
        let value = Network::new(&feat, &[LayerSpec::dense(1)], seed.wrapping_add(2))?;
        Ok(ActorCritic {
            torso,
            policy,
            value,
            kind,
        })
    }

    pub fn state_shape(&self) -> &[usize] {
        self.torso.input_shape()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Forward> {
        let torso = self.torso.forward(x)?;
        let policy = self.policy.forward(torso.output())?;
        let value = self.value.forward(torso.output())?;
        Ok(Forward { torso, policy, value })
    }

    pub fn log_prob(&self, head_row: &[f32], action: &Action) -> Result<f64> {
        log_prob(self.kind, head_row, action)
    }

    pub fn act(&self, state: &Tensor, mode: ActMode, rng: &mut ChaCha8Rng) -> Result<ActOutput> {
        let x = Tensor::stack(&[state])?;
        let f = self.forward(&x)?;
        let row = f.head().data();
        let value = f.values().data()[0] as f64;
        let action = match (self.kind, mode) {
            (PolicyKind::Categorical(_), ActMode::Sample) => Action::Discrete(sample_categorical(row, rng)?.0),
            (PolicyKind::Categorical(_), ActMode::Greedy) => Action::Discrete(argmax(row)),
            (PolicyKind::Gaussian(d), m) => {
                if d != 2 {
                    return Err(AgentError::Config("continuous control uses a 2-d Gaussian".into()));
                }
                let z = match m {
                    ActMode::Sample => sample_gaussian(&row[..d], &row[d..], rng),
                    ActMode::Greedy => row[..d].iter().map(|&v| v as f64).collect(),
                };
                Action::Continuous([z[0], z[1]])
            }
        };
        let logp = self.log_prob(row, &action)?;
        Ok(ActOutput { action, logp, value })
    }

    pub fn value_of(&self, state: &Tensor) -> Result<f64> {
        let x = Tensor::stack(&[state])?;
        let h = self.torso.forward(&x)?;
        Ok(self.value.forward(h.output())?.output().data()[0] as f64)
    }

    /// Backpropagates head-output gradients through heads and torso.
    fn backward(&self, f: &Forward, d_head: &Tensor, d_value: &Tensor) -> Result<[Gradients; 3]> {
        let (gp, dh1) = self.policy.backward(&f.policy, d_head, true)?;
        let (gv, dh2) = self.value.backward(&f.value, d_value, true)?;
        let mut dh = dh1.expect("requested");
        dh.add_assign(&dh2.expect("requested"));
        let (gt, _) = self.torso.backward(&f.torso, &dh, false)?;
        Ok([gt, gp, gv])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.torso.to_bytes());
        w.bytes(&self.policy.to_bytes());
        w.bytes(&self.value.to_bytes());
        w.finish()
    }

    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader::new(bytes);
        self.torso.load_bytes(r.bytes()?)?;
        self.policy.load_bytes(r.bytes()?)?;
        self.value.load_bytes(r.bytes()?)?;
        r.finish()
    }
}

/// Adam states for torso, policy head and value head.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoOptimizer {
    pub states: [AdamState; 3],
}

impl PpoOptimizer {
    pub fn new(model: &ActorCritic, lr: f64) -> Self {
        let cfg = AdamConfig {
            lr,
            eps: 1e-5,
            ..Default::default()
        };
        PpoOptimizer {
            states: [
                AdamState::new(model.torso.params(), cfg),
                AdamState::new(model.policy.params(), cfg),
                AdamState::new(model.value.params(), cfg),
            ],
        }
    }

    fn step(&mut self, model: &mut ActorCritic, grads: &[Gradients; 3]) -> Result<()> {
        self.states[0].step(model.torso.params_mut(), &grads[0])?;
        self.states[1].step(model.policy.params_mut(), &grads[1])?;
        self.states[2].step(model.value.params_mut(), &grads[2])?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        for s in &self.states {
            w.bytes(&s.to_bytes());
        }
        w.finish()
    }

    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader::new(bytes);
        for s in &mut self.states {
            s.load_bytes(r.bytes()?)?;
        }
        r.finish()
    }
}

/// Transitions collected with the behavior policy, plus GAE outputs.
#[derive(Clone, Debug, Default)]
pub struct RolloutBatch {
    pub state_len: usize,
    pub states: Vec<f32>,
    pub actions: Vec<Action>,
    pub logps: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Runs GAE over this segment with `bootstrap` as the value after its
    /// last step.
    pub fn finish(&mut self, bootstrap: f64, gamma: f64, lambda: f64) {
        let mut v = self.values.clone();
        v.push(bootstrap);
        let (adv, ret) = gae(&self.rewards, &v, &self.dones, gamma, lambda);
        self.advantages = adv;
        self.returns = ret;
    }

    pub fn append(&mut self, other: RolloutBatch) {
        self.state_len = other.state_len;
        self.states.extend(other.states);
        self.actions.extend(other.actions);
        self.logps.extend(other.logps);
        self.rewards.extend(other.rewards);
        self.dones.extend(other.dones);
        self.values.extend(other.values);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
    pub early_stopped: bool,
    /// Largest `|ratio − 1|` over the first minibatch of the first epoch.
    pub first_ratio_deviation: f64,
}

/// Loss terms and head-output gradients for one minibatch.
pub struct MinibatchLoss {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub max_ratio_deviation: f64,
    /// `[n, head width]`, row-major.
    pub d_head: Vec<f64>,
    pub d_value: Vec<f64>,
}

impl MinibatchLoss {
    pub fn total(&self, cfg: &PpoConfig) -> f64 {
        self.policy_loss + cfg.value_coef * self.value_loss - cfg.entropy_coef * self.entropy
    }
}

/// Evaluates `−clipped surrogate + c_v·(V − target)² − c_e·entropy`, averaged
/// over the minibatch `idx`, from policy-head rows and values, together with
/// its gradient with respect to those outputs.
pub fn ppo_loss(
    kind: PolicyKind,
    head: &[f64],
    values: &[f64],
    batch: &RolloutBatch,
    idx: &[usize],
    cfg: &PpoConfig,
    normalize_advantages: bool,
) -> Result<MinibatchLoss> {
    let n = idx.len();
    let inv = 1.0 / n as f64;
    let width = head.len() / n;
    let mut adv: Vec<f64> = idx.iter().map(|&i| batch.advantages[i]).collect();
    if normalize_advantages && n > 1 {
        let mean = adv.iter().sum::<f64>() * inv;
        let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() * inv;
        let sd = var.sqrt() + 1e-8;
        adv.iter_mut().for_each(|a| *a = (*a - mean) / sd);
    }

    let mut out = MinibatchLoss {
        policy_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        approx_kl: 0.0,
        clip_fraction: 0.0,
        max_ratio_deviation: 0.0,
        d_head: vec![0.0; head.len()],
        d_value: vec![0.0; n],
    };

    for (k, &i) in idx.iter().enumerate() {
        let row = &head[k * width..(k + 1) * width];
        let action = &batch.actions[i];
        let logp = log_prob(kind, row, action)?;
        let ratio = (logp - batch.logps[i]).exp();
        let a = adv[k];
        out.policy_loss -= clipped_surrogate(ratio, a, cfg.clip) * inv;
        out.approx_kl += (batch.logps[i] - logp) * inv;
        if (ratio - 1.0).abs() > cfg.clip {
            out.clip_fraction += inv;
        }
        out.max_ratio_deviation = out.max_ratio_deviation.max((ratio - 1.0).abs());
        // d(−surrogate)/d logp
        let g = -clipped_surrogate_grad(ratio, a, cfg.clip) * inv;
        let drow = &mut out.d_head[k * width..(k + 1) * width];
        match (kind, action) {
            (PolicyKind::Categorical(_), Action::Discrete(act)) => {
                let lp = log_softmax(row);
                let h = entropy_categorical(row);
                out.entropy += h * inv;
                for j in 0..width {
                    let p = lp[j].exp();
                    let onehot = if j == *act { 1.0 } else { 0.0 };
                    // dH/dl_j = −p_j (log p_j + H)
                    let d_ent = -p * (lp[j] + h);
                    drow[j] = g * (onehot - p) - cfg.entropy_coef * d_ent * inv;
                }
            }
            (PolicyKind::Gaussian(d), Action::Continuous(z)) => {
                out.entropy += gaussian_entropy(&row[d..]) * inv;
                for j in 0..d {
                    let sd = row[d + j].exp();
                    let zz = (z[j] - row[j]) / sd;
                    drow[j] = g * zz / sd;
                    drow[d + j] = if cfg.fixed_sigma {
                        0.0
                    } else {
                        g * (zz * zz - 1.0) - cfg.entropy_coef * inv
                    };
                }
            }
            _ => unreachable!("log_prob already checked the action kind"),
        }
        let err = values[k] - batch.returns[i];
        out.value_loss += err * err * inv;
        out.d_value[k] = cfg.value_coef * 2.0 * err * inv;
    }
    Ok(out)
}

fn gather_states(batch: &RolloutBatch, idx: &[usize], state_shape: &[usize]) -> Result<Tensor> {
    let len = batch.state_len;
    let mut data = Vec::with_capacity(idx.len() * len);
    for &i in idx {
        data.extend_from_slice(&batch.states[i * len..(i + 1) * len]);
    }
    let mut shape = vec![idx.len()];
    shape.extend_from_slice(state_shape);
    Ok(Tensor::from_vec(&shape, data)?)
}

/// Epochs of shuffled minibatch steps on one rollout.
pub fn ppo_update(
    model: &mut ActorCritic,
    opt: &mut PpoOptimizer,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateMetrics> {
    let mut m = UpdateMetrics::default();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let shape = model.state_shape().to_vec();
    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for (j, idx) in order.chunks(cfg.minibatch).enumerate() {
            let x = gather_states(batch, idx, &shape)?;
            let f = model.forward(&x)?;
            let head: Vec<f64> = f.head().data().iter().map(|&v| v as f64).collect();
            let values: Vec<f64> = f.values().data().iter().map(|&v| v as f64).collect();
            let loss = ppo_loss(model.kind, &head, &values, batch, idx, cfg, true)?;
            if epoch == 0 && j == 0 {
                m.first_ratio_deviation = loss.max_ratio_deviation;
            }
            m.approx_kl = loss.approx_kl;
            if loss.approx_kl > cfg.kl_cap {
                m.early_stopped = true;
                break 'epochs;
            }
            let to32 = |v: &[f64], shape: &[usize]| Tensor::from_vec(shape, v.iter().map(|&g| g as f32).collect());
            let d_head = to32(&loss.d_head, f.head().shape())?;
            let d_value = to32(&loss.d_value, f.values().shape())?;
            let mut grads = model.backward(&f, &d_head, &d_value)?;
            let norm = grads.iter().map(|g| g.global_norm().powi(2)).sum::<f64>().sqrt();
            if norm > cfg.max_grad_norm {
                let s = (cfg.max_grad_norm / norm) as f32;
                grads.iter_mut().for_each(|g| g.scale(s));
            }
            opt.step(model, &grads)?;
            m.policy_loss += loss.policy_loss;
            m.value_loss += loss.value_loss;
            m.entropy += loss.entropy;
            m.clip_fraction += loss.clip_fraction;
            m.minibatches += 1;
        }
    }
    if m.minibatches > 0 {
        let k = m.minibatches as f64;
        m.policy_loss /= k;
        m.value_loss /= k;
        m.entropy /= k;
        m.clip_fraction /= k;
    }
    Ok(m)
}

/// A rollout plus the `(return, length)` of every episode finished in it.
pub type Segment = (RolloutBatch, Vec<(f64, usize)>);

/// Collects `steps` transitions from one environment, resetting with random
/// spawns as episodes end.
pub fn collect_segment(
    model: &ActorCritic,
    env: &mut Env,
    rng: &mut ChaCha8Rng,
    tracker: &mut EpisodeTracker,
    steps: usize,
    cfg: &PpoConfig,
) -> Result<Segment> {
    let mut b = RolloutBatch::default();
    let mut finished = Vec::new();
    for _ in 0..steps {
        if env.needs_reset() {
            env.reset(SpawnMode::Random)?;
        }
        let s = env.state();
        let out = model.act(&s, ActMode::Sample, rng)?;
        let r = env.step(out.action)?;
        b.state_len = s.len();
        b.states.extend_from_slice(s.data());
        b.actions.push(out.action);
        b.logps.push(out.logp);
        b.rewards.push(r.reward * cfg.reward_scale);
        b.dones.push(r.done);
        b.values.push(out.value);
        if let Some(ep) = tracker.record(r.reward, r.done) {
            finished.push(ep);
        }
    }
    let bootstrap = if env.needs_reset() { 0.0 } else { model.value_of(&env.state())? };
    b.finish(bootstrap, cfg.gamma, cfg.lambda);
    Ok((b, finished))
}

#[derive(Clone, Debug, Default)]
pub struct IterationReport {
    pub steps: usize,
    pub episodes: Vec<(f64, usize)>,
    pub metrics: UpdateMetrics,
}

/// Model, optimizer and worker environments for on-policy training.
pub struct PpoTrainer {
    pub config: PpoConfig,
    pub model: ActorCritic,
    pub opt: PpoOptimizer,
    pub envs: Vec<Env>,
    rngs: Vec<ChaCha8Rng>,
    shuffle_rng: ChaCha8Rng,
    trackers: Vec<EpisodeTracker>,
    pub steps: u64,
    pub updates: u64,
}

impl PpoTrainer {
    pub fn new(model: ActorCritic, config: PpoConfig, envs: Vec<Env>, seed: u64) -> Result<Self> {
        config.validate()?;
        if envs.len() != config.workers {
            return Err(AgentError::Config(format!(
                "{} environments for {} workers",
                envs.len(),
                config.workers
            )));
        }
        let opt = PpoOptimizer::new(&model, config.lr);
        let rngs = (0..envs.len())
            .map(|w| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(w as u64 + 1);
                r
            })
            .collect();
        let trackers = vec![EpisodeTracker::default(); envs.len()];
        Ok(PpoTrainer {
            opt,
            model,
            envs,
            rngs,
            shuffle_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed),
            trackers,
            steps: 0,
            updates: 0,
            config,
        })
    }

    /// Collects one horizon across workers (merged in worker order) and
    /// runs one update.
    pub fn iterate(&mut self) -> Result<IterationReport> {
        let per = self.config.horizon / self.config.workers;
        let model = &self.model;
        let cfg = &self.config;
        let results: Vec<Result<Segment>> = if self.envs.len() == 1 {
            vec![collect_segment(model, &mut self.envs[0], &mut self.rngs[0], &mut self.trackers[0], per, cfg)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .envs
                    .iter_mut()
                    .zip(self.rngs.iter_mut())
                    .zip(self.trackers.iter_mut())
                    .map(|((env, rng), tracker)| scope.spawn(move || collect_segment(model, env, rng, tracker, per, cfg)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
            })
        };
        let mut batch = RolloutBatch::default();
        let mut episodes = Vec::new();
        for r in results {
            let (b, eps) = r?;
            batch.append(b);
            episodes.extend(eps);
        }
        let metrics = ppo_update(&mut self.model, &mut self.opt, &batch, &self.config, &mut self.shuffle_rng)?;
        self.steps += batch.len() as u64;
        self.updates += 1;
        Ok(IterationReport {
            steps: batch.len(),
            episodes,
            metrics,
        })
    }

    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.model.to_bytes());
        w.bytes(&self.opt.to_bytes());
        w.u64(self.envs.len() as u64);
        for ((env, rng), tracker) in self.envs.iter().zip(&self.rngs).zip(&self.trackers) {
            w.bytes(&env.snapshot().to_bytes());
            w.rng(rng);
            w.bytes(&tracker.to_bytes());
        }
        w.rng(&self.shuffle_rng);
        w.u64(self.steps);
        w.u64(self.updates);
        w.finish()
    }

    pub fn load_state_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader::new(bytes);
        self.model.load_bytes(r.bytes()?)?;
        self.opt.load_bytes(r.bytes()?)?;
        let n = r.u64()? as usize;
        if n != self.envs.len() {
            return Err(AgentError::Format(format!("state has {n} workers, trainer has {}", self.envs.len())));
        }
        for i in 0..n {
            let snap = envapi::EnvSnapshot::from_bytes(r.bytes()?)?;
            self.envs[i].restore(&snap)?;
            self.rngs[i] = r.rng()?;
            self.trackers[i] = EpisodeTracker::from_bytes(r.bytes()?)?;
        }
        self.shuffle_rng = r.rng()?;
        self.steps = r.u64()?;
        self.updates = r.u64()?;
        r.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_with_zero_lambda_is_td_error() {
        let r = [1.0, 0.5, -1.0];
        let v = [0.2, 0.4, 0.1, 0.3];
        let d = [false, false, true];
        let (adv, ret) = gae(&r, &v, &d, 0.9, 0.0);
        assert!((adv[0] - (1.0 + 0.9 * 0.4 - 0.2)).abs() < 1e-12);
        assert!((adv[2] - (-1.0 - 0.1)).abs() < 1e-12);
        assert!((ret[1] - (adv[1] + 0.4)).abs() < 1e-12);
    }

    #[test]
    fn gae_reduces_to_discounted_return() {
        let r = [1.0, 2.0, 3.0];
        let (adv, _) = gae(&r, &[0.0; 4], &[false; 3], 0.9, 1.0);
        assert!((adv[0] - (1.0 + 0.9 * 2.0 + 0.81 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-12);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-12);
        assert_eq!(clipped_surrogate_grad(1.5, 1.0, 0.2), 0.0);
        assert_eq!(clipped_surrogate_grad(0.5, -1.0, 0.2), 0.0);
        assert_eq!(clipped_surrogate_grad(1.1, 1.0, 0.2), 1.1);
        // pessimistic side keeps the gradient
        assert_eq!(clipped_surrogate_grad(1.5, -1.0, 0.2), -1.5);
    }

    #[test]
    fn greedy_gaussian_returns_the_mean() {
        let model = ActorCritic::new(&[3], &[LayerSpec::dense(4), LayerSpec::Relu], PolicyKind::Gaussian(2), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = Tensor::zeros(&[3]);
        let out = model.act(&s, ActMode::Greedy, &mut rng).unwrap();
        // zero input and zero biases give a zero mean
        assert_eq!(out.action, Action::Continuous([0.0, 0.0]));
        assert_eq!(envapi::ActionSpace::Continuous.map(out.action).unwrap(), (0.175, 0.0));
    }
}
