//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; agent and depth settings
//! use dotted prefixes (`ppo.lr`, `dqn.batch_size`, `depth.epochs`). Unknown
//! keys and repeated keys are errors.

use std::path::Path;
use std::str::FromStr;

use agents::{DqnConfig, LossKind, PpoConfig};
use depthgen::{GanMode, GanTrainConfig, PosePolicy};
use envapi::{ActionSpace, EnvConfig, EpisodeConfig, SensorMode};
use simworld::CdMode;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Dqn,
    Ppo,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dqn => "dqn",
            Algorithm::Ppo => "ppo",
        }
    }
}

/// Settings for dataset capture and depth-model training.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthSettings {
    pub pairs: usize,
    pub policy: PosePolicy,
    pub train: GanTrainConfig,
}

impl Default for DepthSettings {
    fn default() -> Self {
        DepthSettings {
            pairs: 1024,
            policy: PosePolicy::RandomSafe,
            train: GanTrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Built-in map name (`circuit2`, `maze`) or a path to a map file.
    pub map: String,
    pub algorithm: Algorithm,
    pub actions: String,
    pub sensor: SensorMode,
    /// Depth model file for the `depth_pred` and `fused` sensors.
    pub depth_model: String,
    pub total_steps: u64,
    pub seed: u64,
    pub obs_size: usize,
    pub supersample: usize,
    pub max_episode_steps: usize,
    pub cd_mode: CdMode,
    pub eval_episodes: usize,
    pub eval_period: u64,
    /// Sample actions during evaluation instead of acting greedily.
    pub eval_stochastic: bool,
    /// Steps between periodic checkpoints; 0 keeps only the final one.
    pub checkpoint_period: u64,
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
    pub depth: DepthSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map: "circuit2".into(),
            algorithm: Algorithm::Ppo,
            actions: "disc5".into(),
            sensor: SensorMode::Gray,
            depth_model: String::new(),
            total_steps: 150_000,
            seed: 0,
            obs_size: 84,
            supersample: 1,
            max_episode_steps: envapi::MAX_EPISODE_STEPS,
            cd_mode: CdMode::Mean,
            eval_episodes: 12,
            eval_period: 10_000,
            eval_stochastic: false,
            checkpoint_period: 50_000,
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
            depth: DepthSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn cd_name(m: CdMode) -> &'static str {
    match m {
        CdMode::Mean => "mean",
        CdMode::Sum => "sum",
    }
}

fn policy_name(p: PosePolicy) -> &'static str {
    match p {
        PosePolicy::RandomSafe => "random_safe",
        PosePolicy::Scan => "scan",
    }
}

impl RunConfig {
    /// Parses `text` on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(HarnessError::Config(format!("line {}: duplicate key {key}", no + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| HarnessError::Config(format!("line {}: {}", no + 1, strip(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides, then validates.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("override {o:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "map" => self.map = v.to_string(),
            "algorithm" => {
                self.algorithm = match v {
                    "dqn" => Algorithm::Dqn,
                    "ppo" => Algorithm::Ppo,
                    _ => return Err(HarnessError::Config(format!("algorithm: expected dqn or ppo, got {v:?}"))),
                }
            }
            "actions" => {
                ActionSpace::from_name(v)?;
                self.actions = v.to_string();
            }
            "sensor" => self.sensor = SensorMode::from_name(v)?,
            "depth_model" => self.depth_model = v.to_string(),
            "total_steps" => self.total_steps = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "obs_size" => self.obs_size = parse(key, v)?,
            "supersample" => self.supersample = parse(key, v)?,
            "max_episode_steps" => self.max_episode_steps = parse(key, v)?,
            "cd_mode" => {
                self.cd_mode = match v {
                    "mean" => CdMode::Mean,
                    "sum" => CdMode::Sum,
                    _ => return Err(HarnessError::Config(format!("cd_mode: expected mean or sum, got {v:?}"))),
                }
            }
            "eval.episodes" => self.eval_episodes = parse(key, v)?,
            "eval.period" => self.eval_period = parse(key, v)?,
            "eval.stochastic" => self.eval_stochastic = parse_bool(key, v)?,
            "checkpoint.period" => self.checkpoint_period = parse(key, v)?,

            "dqn.gamma" => self.dqn.gamma = parse(key, v)?,
            "dqn.lr" => self.dqn.lr = parse(key, v)?,
            "dqn.batch_size" => self.dqn.batch_size = parse(key, v)?,
            "dqn.target_sync" => self.dqn.target_sync = parse(key, v)?,
            "dqn.eps_start" => self.dqn.eps_start = parse(key, v)?,
            "dqn.eps_end" => self.dqn.eps_end = parse(key, v)?,
            "dqn.eps_decay_steps" => self.dqn.eps_decay_steps = parse(key, v)?,
            "dqn.learn_start" => self.dqn.learn_start = parse(key, v)?,
            "dqn.train_freq" => self.dqn.train_freq = parse(key, v)?,
            "dqn.double" => self.dqn.double = parse_bool(key, v)?,
            "dqn.dueling" => self.dqn.dueling = parse_bool(key, v)?,
            "dqn.prioritized" => self.dqn.prioritized = parse_bool(key, v)?,
            "dqn.alpha" => self.dqn.alpha = parse(key, v)?,
            "dqn.beta0" => self.dqn.beta0 = parse(key, v)?,
            "dqn.beta_anneal_steps" => self.dqn.beta_anneal_steps = parse(key, v)?,
            "dqn.priority_eps" => self.dqn.priority_eps = parse(key, v)?,
            "dqn.capacity" => self.dqn.capacity = parse(key, v)?,
            "dqn.loss" => {
                self.dqn.loss = match v {
                    "huber" => LossKind::Huber,
                    "mse" => LossKind::Mse,
                    _ => return Err(HarnessError::Config(format!("dqn.loss: expected huber or mse, got {v:?}"))),
                }
            }
            "dqn.grad_clip" => self.dqn.grad_clip = parse(key, v)?,

            "ppo.gamma" => self.ppo.gamma = parse(key, v)?,
            "ppo.lambda" => self.ppo.lambda = parse(key, v)?,
            "ppo.clip" => self.ppo.clip = parse(key, v)?,
            "ppo.epochs" => self.ppo.epochs = parse(key, v)?,
            "ppo.minibatch" => self.ppo.minibatch = parse(key, v)?,
            "ppo.horizon" => self.ppo.horizon = parse(key, v)?,
            "ppo.value_coef" => self.ppo.value_coef = parse(key, v)?,
            "ppo.entropy_coef" => self.ppo.entropy_coef = parse(key, v)?,
            "ppo.lr" => self.ppo.lr = parse(key, v)?,
            "ppo.max_grad_norm" => self.ppo.max_grad_norm = parse(key, v)?,
            "ppo.kl_cap" => self.ppo.kl_cap = parse(key, v)?,
            "ppo.fixed_sigma" => self.ppo.fixed_sigma = parse_bool(key, v)?,
            "ppo.reward_scale" => self.ppo.reward_scale = parse(key, v)?,
            "ppo.workers" => self.ppo.workers = parse(key, v)?,

            "depth.pairs" => self.depth.pairs = parse(key, v)?,
            "depth.policy" => {
                self.depth.policy = PosePolicy::from_name(v).ok_or_else(|| {
                    HarnessError::Config(format!("depth.policy: expected random_safe or scan, got {v:?}"))
                })?
            }
            "depth.epochs" => self.depth.train.epochs = parse(key, v)?,
            "depth.lambda_l1" => self.depth.train.lambda_l1 = parse(key, v)?,
            "depth.lr" => self.depth.train.lr = parse(key, v)?,
            "depth.beta1" => self.depth.train.beta1 = parse(key, v)?,
            "depth.batch" => self.depth.train.batch = parse(key, v)?,
            "depth.base" => self.depth.train.base = parse(key, v)?,
            "depth.mode" => {
                self.depth.train.mode = GanMode::from_name(v).ok_or_else(|| {
                    HarnessError::Config(format!("depth.mode: expected adversarial or l1_only, got {v:?}"))
                })?
            }
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = &self.dqn;
        let p = &self.ppo;
        let g = &self.depth.train;
        vec![
            ("map", self.map.clone()),
            ("algorithm", self.algorithm.name().into()),
            ("actions", self.actions.clone()),
            ("sensor", self.sensor.name().into()),
            ("depth_model", self.depth_model.clone()),
            ("total_steps", self.total_steps.to_string()),
            ("seed", self.seed.to_string()),
            ("obs_size", self.obs_size.to_string()),
            ("supersample", self.supersample.to_string()),
            ("max_episode_steps", self.max_episode_steps.to_string()),
            ("cd_mode", cd_name(self.cd_mode).into()),
            ("eval.episodes", self.eval_episodes.to_string()),
            ("eval.period", self.eval_period.to_string()),
            ("eval.stochastic", self.eval_stochastic.to_string()),
            ("checkpoint.period", self.checkpoint_period.to_string()),
            ("dqn.gamma", d.gamma.to_string()),
            ("dqn.lr", d.lr.to_string()),
            ("dqn.batch_size", d.batch_size.to_string()),
            ("dqn.target_sync", d.target_sync.to_string()),
            ("dqn.eps_start", d.eps_start.to_string()),
            ("dqn.eps_end", d.eps_end.to_string()),
            ("dqn.eps_decay_steps", d.eps_decay_steps.to_string()),
            ("dqn.learn_start", d.learn_start.to_string()),
            ("dqn.train_freq", d.train_freq.to_string()),
            ("dqn.double", d.double.to_string()),
            ("dqn.dueling", d.dueling.to_string()),
            ("dqn.prioritized", d.prioritized.to_string()),
            ("dqn.alpha", d.alpha.to_string()),
            ("dqn.beta0", d.beta0.to_string()),
            ("dqn.beta_anneal_steps", d.beta_anneal_steps.to_string()),
            ("dqn.priority_eps", d.priority_eps.to_string()),
            ("dqn.capacity", d.capacity.to_string()),
            (
                "dqn.loss",
                match d.loss {
                    LossKind::Huber => "huber".into(),
                    LossKind::Mse => "mse".into(),
                },
            ),
            ("dqn.grad_clip", d.grad_clip.to_string()),
            ("ppo.gamma", p.gamma.to_string()),
            ("ppo.lambda", p.lambda.to_string()),
            ("ppo.clip", p.clip.to_string()),
            ("ppo.epochs", p.epochs.to_string()),
            ("ppo.minibatch", p.minibatch.to_string()),
            ("ppo.horizon", p.horizon.to_string()),
            ("ppo.value_coef", p.value_coef.to_string()),
            ("ppo.entropy_coef", p.entropy_coef.to_string()),
            ("ppo.lr", p.lr.to_string()),
            ("ppo.max_grad_norm", p.max_grad_norm.to_string()),
            ("ppo.kl_cap", p.kl_cap.to_string()),
            ("ppo.fixed_sigma", p.fixed_sigma.to_string()),
            ("ppo.reward_scale", p.reward_scale.to_string()),
            ("ppo.workers", p.workers.to_string()),
            ("depth.pairs", self.depth.pairs.to_string()),
            ("depth.policy", policy_name(self.depth.policy).into()),
            ("depth.epochs", g.epochs.to_string()),
            ("depth.lambda_l1", g.lambda_l1.to_string()),
            ("depth.lr", g.lr.to_string()),
            ("depth.beta1", g.beta1.to_string()),
            ("depth.batch", g.batch.to_string()),
            ("depth.base", g.base.to_string()),
            ("depth.mode", g.mode.name().into()),
        ]
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace::from_name(&self.actions).expect("validated at set")
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            episode: EpisodeConfig {
                max_steps: self.max_episode_steps,
                gamma: match self.algorithm {
                    Algorithm::Dqn => self.dqn.gamma,
                    Algorithm::Ppo => self.ppo.gamma,
                },
                sensor: self.sensor,
                cd_mode: self.cd_mode,
            },
            actions: self.action_space(),
            obs_size: self.obs_size,
            supersample: self.supersample,
        }
    }

    /// Depth-training settings with the run seed folded in.
    pub fn gan_config(&self) -> GanTrainConfig {
        GanTrainConfig {
            seed: self.seed,
            ..self.depth.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.map.is_empty() {
            return bad("map must be set".into());
        }
        self.env_config().validate()?;
        if self.eval_episodes == 0 {
            return bad("eval.episodes must be at least 1".into());
        }
        if self.eval_period == 0 {
            return bad("eval.period must be at least 1".into());
        }
        if self.sensor.needs_model() && self.depth_model.is_empty() {
            return bad(format!("sensor {} needs depth_model", self.sensor.name()));
        }
        match self.algorithm {
            Algorithm::Dqn => {
                if self.actions == "continuous" {
                    return bad("dqn needs a discrete action space".into());
                }
                self.dqn.validate()?;
            }
            Algorithm::Ppo => self.ppo.validate()?,
        }
        if self.depth.pairs == 0 {
            return bad("depth.pairs must be at least 1".into());
        }
        self.depth.train.validate()?;
        Ok(())
    }
}

fn strip(e: HarnessError) -> String {
    match e {
        HarnessError::Config(m) | HarnessError::Runtime(m) => m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(&["ppo.lr=0.0003".into(), "obs_size=32".into(), "dqn.double=false".into()])
            .unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
    }

    #[test]
    fn comments_and_prefixes() {
        let cfg = RunConfig::parse("# run\nalgorithm = dqn # trailing\n\ndqn.lr = 5e-4\n").unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Dqn);
        assert_eq!(cfg.dqn.lr, 5e-4);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "dqn.lrr = 1",
            "seed = -1",
            "seed = 1\nseed = 2",
            "actions = disc4",
            "no equals sign",
            "algorithm = dqn\nactions = continuous",
            "sensor = fused",
            "eval.episodes = 0",
            "ppo.horizon = 100\nppo.workers = 3",
        ] {
            let e = RunConfig::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }
}
