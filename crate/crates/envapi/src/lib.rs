//! Episodic obstacle-avoidance environment on top of `simworld`.
//!
//! States are stacks of the last four observation frames laid out channels
//! first: `[C·4, H, W]` where `C` is 1 for gray or depth and 2 for fused
//! observations. The range finder only feeds the reward.

pub mod action;
pub mod env;
pub mod error;
pub mod observation;

pub use action::{Action, ActionSpace};
pub use env::{Env, EnvConfig, EnvSnapshot, EpisodeConfig, StepInfo, StepResult};
pub use error::EnvError;
pub use observation::{build_observation_frame, DepthPredictor, ObservationSpec, SensorMode};

/// Episode length cap in control steps.
pub const MAX_EPISODE_STEPS: usize = 2000;
/// Number of stacked frames in a state.
pub const FRAME_STACK: usize = 4;
