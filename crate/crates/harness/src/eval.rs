//! Evaluation protocol: every episode starts at the map's anchor pose and
//! runs to collision or the step limit; returns are undiscounted sums.

use envapi::{Action, Env, StepResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simworld::SpawnMode;

use crate::agent::Policy;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rewards: Vec<f64>,
    pub lengths: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single episode).
    pub std: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    // identical returns (a deterministic policy) report exactly that value
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return (xs[0], 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// RNG for episode `episode` of an evaluation seeded with `seed`.
pub fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64 + 1);
    rng
}

/// Runs one anchor-spawned episode, calling `on_step` after every step.
pub fn run_episode(
    policy: &Policy,
    env: &mut Env,
    stochastic: bool,
    rng: &mut ChaCha8Rng,
    max_steps: usize,
    mut on_step: impl FnMut(&Env, &Action, &StepResult) -> Result<()>,
) -> Result<(f64, usize)> {
    env.reset(SpawnMode::EvalAnchor)?;
    let mut total = 0.0;
    let mut steps = 0;
    while steps < max_steps {
        let action = policy.act(&env.state(), stochastic, rng)?;
        let r = env.step(action)?;
        total += r.reward;
        steps += 1;
        on_step(env, &action, &r)?;
        if r.done {
            break;
        }
    }
    Ok((total, steps))
}

pub fn evaluate(policy: &Policy, env: &mut Env, episodes: usize, stochastic: bool, seed: u64) -> Result<EvalReport> {
    let mut rewards = Vec::with_capacity(episodes);
    let mut lengths = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut rng = episode_rng(seed, ep);
        let (r, n) = run_episode(policy, env, stochastic, &mut rng, usize::MAX, |_, _, _| Ok(()))?;
        rewards.push(r);
        lengths.push(n);
    }
    let (mean, std) = mean_std(&rewards);
    Ok(EvalReport {
        rewards,
        lengths,
        mean,
        std,
    })
}
