//! Learners for the navigation environment: a deep Q-network with dueling,
//! double-Q and prioritized replay, and proximal policy optimization with a
//! clipped surrogate for discrete and Gaussian policies.

pub mod arch;
pub mod codec;
pub mod dqn;
pub mod error;
pub mod ppo;
pub mod replay;
pub mod sumtree;

pub use dqn::{DqnConfig, DqnLearner, DqnTrainer, LossKind};
pub use error::{AgentError, Result};
pub use ppo::{ActMode, ActorCritic, PolicyKind, PpoConfig, PpoTrainer};
pub use replay::{PrioritizedReplay, ReplayConfig};

use codec::{Reader, Writer};

/// Running return and length of the episode in progress.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTracker {
    pub running_return: f64,
    pub running_length: usize,
}

impl EpisodeTracker {
    /// Adds a step; returns `(return, length)` when `done` closes the
    /// episode.
    pub fn record(&mut self, reward: f64, done: bool) -> Option<(f64, usize)> {
        self.running_return += reward;
        self.running_length += 1;
        if done {
            let out = (self.running_return, self.running_length);
            *self = Self::default();
            Some(out)
        } else {
            None
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.f64(self.running_return);
        w.u64(self.running_length as u64);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let t = EpisodeTracker {
            running_return: r.f64()?,
            running_length: r.u64()? as usize,
        };
        r.finish()?;
        Ok(t)
    }
}
