//! Deep Q-learning with optional dueling head, double-Q targets and
//! prioritized replay.

use std::sync::Arc;

use envapi::{Action, Env};
use nncore::{clip_global_norm, AdamConfig, AdamState, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simworld::SpawnMode;

use crate::codec::{Reader, Writer};
use crate::error::{AgentError, Result};
use crate::replay::{PrioritizedReplay, ReplayConfig, StoredState, Transition};
use crate::EpisodeTracker;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Huber,
    Mse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub target_sync: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u64,
    pub learn_start: u64,
    pub train_freq: u64,
    pub double: bool,
    pub dueling: bool,
    pub prioritized: bool,
    pub alpha: f64,
    pub beta0: f64,
    pub beta_anneal_steps: u64,
    pub priority_eps: f64,
    pub capacity: usize,
    pub loss: LossKind,
    pub grad_clip: f64,
}

impl Default for DqnConfig {
    /// Baseline-style defaults; `eps_decay_steps` and `beta_anneal_steps`
    /// are usually derived from the training budget.
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            lr: 1e-4,
            batch_size: 32,
            target_sync: 1000,
            eps_start: 1.0,
            eps_end: 0.02,
            eps_decay_steps: 15_000,
            learn_start: 1000,
            train_freq: 4,
            double: true,
            dueling: true,
            prioritized: true,
            alpha: 0.6,
            beta0: 0.4,
            beta_anneal_steps: 150_000,
            priority_eps: 1e-6,
            capacity: 250_000,
            loss: LossKind::Huber,
            grad_clip: 10.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("dqn.gamma must lie in (0, 1]");
        }
        if self.lr < 0.0 || !self.lr.is_finite() {
            return bad("dqn.lr must be a finite non-negative number");
        }
        if self.batch_size == 0 || self.train_freq == 0 || self.target_sync == 0 {
            return bad("dqn.batch_size, dqn.train_freq and dqn.target_sync must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps_end) || !(0.0..=1.0).contains(&self.eps_start) {
            return bad("dqn epsilon values must lie in [0, 1]");
        }
        if self.eps_end > self.eps_start {
            return bad("dqn epsilon schedule must be non-increasing");
        }
        if !(0.0..=1.0).contains(&self.beta0) || self.alpha < 0.0 || self.priority_eps <= 0.0 {
            return bad("dqn replay exponents out of range");
        }
        if self.capacity < self.batch_size {
            return bad("dqn.capacity must hold at least one batch");
        }
        Ok(())
    }

    /// Linear decay from `eps_start` to `eps_end`, then constant.
    pub fn epsilon(&self, step: u64) -> f64 {
        if self.eps_decay_steps == 0 {
            return self.eps_end;
        }
        if step >= self.eps_decay_steps {
            return self.eps_end;
        }
        let f = step as f64 / self.eps_decay_steps as f64;
        self.eps_start + f * (self.eps_end - self.eps_start)
    }

    pub fn beta(&self, step: u64) -> f64 {
        if self.beta_anneal_steps == 0 {
            return 1.0;
        }
        let f = (step as f64 / self.beta_anneal_steps as f64).min(1.0);
        self.beta0 + f * (1.0 - self.beta0)
    }
}

/// Bootstrapped targets. `q_next_target` and `q_next_online` are row-major
/// `[batch, actions]`; passing the online values selects the double-Q rule.
pub fn dqn_targets(
    rewards: &[f64],
    dones: &[bool],
    q_next_target: &[f64],
    q_next_online: Option<&[f64]>,
    actions: usize,
    gamma: f64,
) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .enumerate()
        .map(|(i, (&r, &done))| {
            if done {
                return r;
            }
            let qt = &q_next_target[i * actions..(i + 1) * actions];
            let next = match q_next_online {
                Some(qo) => qt[argmax(&qo[i * actions..(i + 1) * actions])],
                None => qt.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            };
            r + gamma * next
        })
        .collect()
}

/// First index of the maximum.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Huber loss with unit threshold and its derivative.
pub fn huber(x: f64) -> (f64, f64) {
    if x.abs() <= 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

/// Weighted mean TD loss. Returns `(loss, td_errors, d loss / d q)`, with
/// `td = q − y`.
pub fn td_loss(q: &[f64], y: &[f64], weights: &[f64], kind: LossKind) -> (f64, Vec<f64>, Vec<f64>) {
    let n = q.len() as f64;
    let mut loss = 0.0;
    let mut td = Vec::with_capacity(q.len());
    let mut grad = Vec::with_capacity(q.len());
    for ((&qi, &yi), &w) in q.iter().zip(y).zip(weights) {
        let d = qi - yi;
        let (l, g) = match kind {
            LossKind::Huber => huber(d),
            LossKind::Mse => (d * d, 2.0 * d),
        };
        loss += w * l / n;
        td.push(d);
        grad.push(w * g / n);
    }
    (loss, td, grad)
}

/// Online and target networks, optimizer and replay.
pub struct DqnLearner {
    pub config: DqnConfig,
    pub online: Network,
    pub target: Network,
    pub adam: AdamState,
    pub replay: PrioritizedReplay,
    pub rng: ChaCha8Rng,
    /// Transitions observed so far.
    pub steps: u64,
    pub updates: u64,
    actions: usize,
}

impl DqnLearner {
    pub fn new(online: Network, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let out = online.output_shape();
        if out.len() != 1 {
            return Err(AgentError::Config(format!("Q network must output a vector, got {out:?}")));
        }
        let actions = out[0];
        let mut target = online.clone();
        target.copy_params_from(&online)?;
        let replay = PrioritizedReplay::new(ReplayConfig {
            capacity: config.capacity,
            alpha: if config.prioritized { config.alpha } else { 0.0 },
            epsilon: config.priority_eps,
        })?;
        let adam = AdamState::new(
            online.params(),
            AdamConfig {
                lr: config.lr,
                ..Default::default()
            },
        );
        Ok(DqnLearner {
            config,
            adam,
            online,
            target,
            replay,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            updates: 0,
            actions,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon(self.steps)
    }

    pub fn q_values(&self, state: &Tensor) -> Result<Vec<f32>> {
        let x = Tensor::stack(&[state])?;
        Ok(self.online.forward(&x)?.into_output().into_data())
    }

    pub fn greedy(&self, state: &Tensor) -> Result<usize> {
        Ok(argmax(&self.q_values(state)?))
    }

    /// ε-greedy action.
    pub fn act(&mut self, state: &Tensor, epsilon: f64) -> Result<usize> {
        if self.rng.gen::<f64>() < epsilon {
            Ok(self.rng.gen_range(0..self.actions))
        } else {
            self.greedy(state)
        }
    }

    pub fn sync_target(&mut self) -> Result<()> {
        self.target.copy_params_from(&self.online)?;
        Ok(())
    }

    /// Stores a transition, trains every `train_freq` steps after
    /// `learn_start` and syncs the target every `target_sync` steps. Returns
    /// the loss when an update ran.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>> {
        if !t.reward.is_finite() {
            return Err(AgentError::Format("non-finite reward".into()));
        }
        self.replay.push(t);
        self.steps += 1;
        let mut loss = None;
        if self.steps >= self.config.learn_start
            && self.steps.is_multiple_of(self.config.train_freq)
            && self.replay.len() >= self.config.batch_size
        {
            loss = Some(self.learn()?);
        }
        if self.steps.is_multiple_of(self.config.target_sync) {
            self.sync_target()?;
        }
        Ok(loss)
    }

    fn gather(&self, indices: &[usize], next: bool) -> Result<Tensor> {
        let shape = self.online.input_shape();
        let len: usize = shape.iter().product();
        let mut data = vec![0.0f32; indices.len() * len];
        for (row, &i) in data.chunks_mut(len).zip(indices) {
            let t = self.replay.get(i);
            let s = if next { &t.next_state } else { &t.state };
            if s.len() != len {
                return Err(AgentError::Format("stored state does not match the network input".into()));
            }
            s.write_to(row);
        }
        let mut full = vec![indices.len()];
        full.extend_from_slice(shape);
        Ok(Tensor::from_vec(&full, data)?)
    }

    /// One gradient step on a prioritized minibatch.
    pub fn learn(&mut self) -> Result<f64> {
        let cfg = &self.config;
        let beta = if cfg.prioritized { cfg.beta(self.steps) } else { 0.0 };
        let sample = self.replay.sample(cfg.batch_size, beta, &mut self.rng);
        let a = self.actions;
        let states = self.gather(&sample.indices, false)?;
        let next = self.gather(&sample.indices, true)?;

        let to64 = |t: &Tensor| -> Vec<f64> { t.data().iter().map(|&v| v as f64).collect() };
        let q_next_t = to64(self.target.forward(&next)?.output());
        let q_next_o = if cfg.double {
            Some(to64(self.online.forward(&next)?.output()))
        } else {
            None
        };
        let mut rewards = Vec::with_capacity(sample.indices.len());
        let mut dones = Vec::with_capacity(sample.indices.len());
        let mut taken = Vec::with_capacity(sample.indices.len());
        for &i in &sample.indices {
            let t = self.replay.get(i);
            rewards.push(t.reward);
            dones.push(t.done);
            taken.push(t.action);
        }
        let y = dqn_targets(&rewards, &dones, &q_next_t, q_next_o.as_deref(), a, cfg.gamma);

        let acts = self.online.forward(&states)?;
        let q_all = acts.output().data();
        let q_sa: Vec<f64> = taken.iter().enumerate().map(|(n, &k)| q_all[n * a + k] as f64).collect();
        let (loss, td, dq) = td_loss(&q_sa, &y, &sample.weights, cfg.loss);
        let mut out_grad = Tensor::zeros(acts.output().shape());
        for (n, (&k, &g)) in taken.iter().zip(&dq).enumerate() {
            out_grad.data_mut()[n * a + k] = g as f32;
        }
        let (mut grads, _) = self.online.backward(&acts, &out_grad, false)?;
        clip_global_norm(&mut grads, cfg.grad_clip);
        self.adam.step(self.online.params_mut(), &grads)?;
        if cfg.prioritized {
            self.replay.update_priorities(&sample.indices, &td);
        }
        self.updates += 1;
        Ok(loss)
    }

    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.online.to_bytes());
        w.bytes(&self.target.to_bytes());
        w.bytes(&self.adam.to_bytes());
        w.rng(&self.rng);
        w.u64(self.steps);
        w.u64(self.updates);
        w.finish()
    }

    pub fn load_state_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader::new(bytes);
        self.online.load_bytes(r.bytes()?)?;
        self.target.load_bytes(r.bytes()?)?;
        self.adam.load_bytes(r.bytes()?)?;
        self.rng = r.rng()?;
        self.steps = r.u64()?;
        self.updates = r.u64()?;
        r.finish()
    }
}

/// Outcome of one environment step during training.
#[derive(Clone, Debug, Default)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub loss: Option<f64>,
    /// `(return, length)` when an episode finished on this step.
    pub episode: Option<(f64, usize)>,
}

/// Drives one environment with a [`DqnLearner`].
pub struct DqnTrainer {
    pub learner: DqnLearner,
    pub env: Env,
    pub tracker: EpisodeTracker,
    current: Option<Arc<StoredState>>,
}

impl DqnTrainer {
    pub fn new(learner: DqnLearner, env: Env) -> Self {
        DqnTrainer {
            learner,
            env,
            tracker: EpisodeTracker::default(),
            current: None,
        }
    }

    /// ε-greedy act, store, and learn per the schedule.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.env.needs_reset() {
            self.env.reset(SpawnMode::Random)?;
            self.current = None;
        }
        let state = self.env.state();
        let stored = match self.current.take() {
            Some(s) => s,
            None => Arc::new(StoredState::quantize(state.data())),
        };
        let eps = self.learner.epsilon();
        let action = self.learner.act(&state, eps)?;
        let r = self.env.step(Action::Discrete(action))?;
        let next = Arc::new(StoredState::quantize(r.state.data()));
        let loss = self.learner.observe(Transition {
            state: stored,
            action,
            reward: r.reward,
            next_state: next.clone(),
            done: r.done,
        })?;
        self.current = (!r.done).then_some(next);
        let episode = self.tracker.record(r.reward, r.done);
        Ok(StepOutcome {
            reward: r.reward,
            done: r.done,
            loss,
            episode,
        })
    }

    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.learner.state_bytes());
        w.bytes(&self.learner.replay.to_bytes());
        w.bytes(&self.env.snapshot().to_bytes());
        w.bytes(&self.tracker.to_bytes());
        w.finish()
    }

    pub fn load_state_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader::new(bytes);
        self.learner.load_state_bytes(r.bytes()?)?;
        self.learner.replay.load_bytes(r.bytes()?)?;
        let snap = envapi::EnvSnapshot::from_bytes(r.bytes()?)?;
        self.env.restore(&snap)?;
        self.tracker = EpisodeTracker::from_bytes(r.bytes()?)?;
        r.finish()?;
        // re-link the in-flight state to the replay copy so stored states stay shared
        self.current = None;
        if !self.env.needs_reset() {
            if let Some(t) = self.learner.replay.last() {
                if !t.done && *t.next_state == StoredState::quantize(self.env.state().data()) {
                    self.current = Some(t.next_state.clone());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_examples() {
        assert_eq!(dqn_targets(&[-1.0], &[true], &[5.0, 7.0], None, 2, 0.99), vec![-1.0]);
        let y = dqn_targets(&[1.0], &[false], &[2.0, 0.0], None, 2, 0.99);
        assert!((y[0] - 2.98).abs() < 1e-12);
        let y = dqn_targets(&[0.0], &[false], &[5.0, 7.0], Some(&[1.0, 3.0]), 2, 0.99);
        assert!((y[0] - 6.93).abs() < 1e-12);
    }

    #[test]
    fn huber_examples() {
        let (l, td, _) = td_loss(&[0.5], &[0.0], &[1.0], LossKind::Huber);
        assert!((l - 0.125).abs() < 1e-15 && td == vec![0.5]);
        let (l, _, g) = td_loss(&[2.0], &[0.0], &[1.0], LossKind::Huber);
        assert!((l - 1.5).abs() < 1e-15 && g == vec![1.0]);
        let (l, td, g) = td_loss(&[0.3, -1.0], &[0.3, -1.0], &[1.0, 0.5], LossKind::Mse);
        assert_eq!((l, td, g), (0.0, vec![0.0, 0.0], vec![0.0, 0.0]));
    }

    #[test]
    fn greedy_picks_largest_q() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3, 0.2, 0.4]), 1);
    }

    #[test]
    fn schedules() {
        let c = DqnConfig {
            eps_decay_steps: 100,
            beta_anneal_steps: 200,
            ..Default::default()
        };
        assert_eq!(c.epsilon(0), 1.0);
        assert!((c.epsilon(50) - 0.51).abs() < 1e-12);
        assert_eq!(c.epsilon(1000), 0.02);
        assert!((c.beta(100) - 0.7).abs() < 1e-12);
        assert_eq!(c.beta(10_000), 1.0);
        let bad = DqnConfig {
            eps_end: 0.5,
            eps_start: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
