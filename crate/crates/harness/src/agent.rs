//! Builds maps, environments and learners from a [`RunConfig`].

use std::path::Path;
use std::sync::Arc;

use agents::arch::{q_network, torso};
use agents::{ActMode, ActorCritic, DqnLearner, DqnTrainer, PolicyKind, PpoTrainer};
use depthgen::DepthModel;
use envapi::{Action, ActionSpace, DepthPredictor, Env};
use nncore::{Network, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use simworld::GridMap;

use crate::config::{Algorithm, RunConfig};
use crate::error::{HarnessError, Result};

/// Built-in map name or a path to a map file.
pub fn load_map(name: &str) -> Result<Arc<GridMap>> {
    let map = match simworld::maps::by_name(name) {
        Some(text) => GridMap::parse(text).map_err(|e| HarnessError::Config(format!("built-in map {name}: {e}")))?,
        None => {
            let path = Path::new(name);
            if !path.exists() {
                return Err(HarnessError::Config(format!("map {name:?} is neither built in nor a file")));
            }
            GridMap::load(path)?
        }
    };
    Ok(Arc::new(map))
}

/// Loads the depth model when the sensor needs one and checks its input
/// size against the observation size.
pub fn load_depth_model(cfg: &RunConfig) -> Result<Option<Arc<dyn DepthPredictor>>> {
    if !cfg.sensor.needs_model() {
        return Ok(None);
    }
    let model = DepthModel::load(Path::new(&cfg.depth_model))
        .map_err(|e| HarnessError::Config(format!("depth_model {}: {e}", cfg.depth_model)))?;
    if model.input_size() != (cfg.obs_size, cfg.obs_size) {
        return Err(HarnessError::Config(format!(
            "depth model expects {:?} frames but obs_size is {}",
            model.input_size(),
            cfg.obs_size
        )));
    }
    Ok(Some(Arc::new(model)))
}

pub fn make_env(cfg: &RunConfig, map: &Arc<GridMap>, model: &Option<Arc<dyn DepthPredictor>>, seed: u64) -> Result<Env> {
    Ok(Env::new(map.clone(), cfg.env_config(), seed, model.clone())?)
}

/// Environment seed for PPO worker `w`; worker 0 uses the run seed.
fn worker_seed(seed: u64, w: usize) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(w as u64))
}

#[allow(clippy::large_enum_variant)] // one per process
pub enum Agent {
    Dqn(DqnTrainer),
    Ppo(PpoTrainer),
}

impl Agent {
    pub fn build(cfg: &RunConfig, map: &Arc<GridMap>, model: &Option<Arc<dyn DepthPredictor>>) -> Result<Agent> {
        let shape = cfg.env_config().observation_spec().state_shape();
        let actions = cfg.action_space();
        match cfg.algorithm {
            Algorithm::Dqn => {
                let n = actions
                    .num_actions()
                    .ok_or_else(|| HarnessError::Config("dqn needs a discrete action space".into()))?;
                let net = Network::new(&shape, &q_network(&shape, n, cfg.dqn.dueling), cfg.seed)?;
                let learner = DqnLearner::new(net, cfg.dqn.clone(), cfg.seed)?;
                Ok(Agent::Dqn(DqnTrainer::new(learner, make_env(cfg, map, model, cfg.seed)?)))
            }
            Algorithm::Ppo => {
                let kind = match actions.num_actions() {
                    Some(n) => PolicyKind::Categorical(n),
                    None => PolicyKind::Gaussian(2),
                };
                let ac = ActorCritic::new(&shape, &torso(&shape), kind, cfg.seed)?;
                let envs = (0..cfg.ppo.workers)
                    .map(|w| make_env(cfg, map, model, worker_seed(cfg.seed, w)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Agent::Ppo(PpoTrainer::new(ac, cfg.ppo.clone(), envs, cfg.seed)?))
            }
        }
    }

    pub fn state_bytes(&self) -> Vec<u8> {
        match self {
            Agent::Dqn(t) => t.state_bytes(),
            Agent::Ppo(t) => t.state_bytes(),
        }
    }

    pub fn load_state_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        match self {
            Agent::Dqn(t) => t.load_state_bytes(bytes)?,
            Agent::Ppo(t) => t.load_state_bytes(bytes)?,
        }
        Ok(())
    }

    pub fn policy(&self) -> Policy<'_> {
        match self {
            Agent::Dqn(t) => Policy::Dqn(&t.learner),
            Agent::Ppo(t) => Policy::Ppo(&t.model),
        }
    }
}

/// Anything that can pick actions during evaluation or rendering.
pub enum Policy<'a> {
    Dqn(&'a DqnLearner),
    Ppo(&'a ActorCritic),
    /// Uniform over the discrete table, or uniform over the clipped
    /// pre-squash box for continuous control.
    Random(ActionSpace),
    Constant(Action),
}

impl Policy<'_> {
    /// Greedy (or mean) action unless `stochastic`, in which case PPO samples
    /// and DQN acts ε-greedily with its final exploration rate.
    pub fn act(&self, state: &Tensor, stochastic: bool, rng: &mut ChaCha8Rng) -> Result<Action> {
        Ok(match self {
            Policy::Dqn(l) => {
                if stochastic && rng.gen::<f64>() < l.config.eps_end {
                    Action::Discrete(rng.gen_range(0..l.num_actions()))
                } else {
                    Action::Discrete(l.greedy(state)?)
                }
            }
            Policy::Ppo(m) => {
                let mode = if stochastic { ActMode::Sample } else { ActMode::Greedy };
                m.act(state, mode, rng)?.action
            }
            Policy::Random(space) => match space.num_actions() {
                Some(n) => Action::Discrete(rng.gen_range(0..n)),
                None => {
                    let c = envapi::action::CLIP;
                    Action::Continuous([rng.gen_range(-c..c), rng.gen_range(-c..c)])
                }
            },
            Policy::Constant(a) => *a,
        })
    }

    /// Whether `act` consults the RNG even with `stochastic == false`.
    pub fn is_random(&self) -> bool {
        matches!(self, Policy::Random(_))
    }
}
