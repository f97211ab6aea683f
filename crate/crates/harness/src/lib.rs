//! Orchestration for the navigation agents: configuration, the training
//! loop with periodic evaluation and checkpoints, cross-seed aggregation,
//! frame dumps and the depth-model workflow.

pub mod agent;
pub mod aggregate;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod render;
pub mod train;

pub use agent::{load_map, Agent, Policy};
pub use checkpoint::Checkpoint;
pub use config::{Algorithm, RunConfig};
pub use error::{HarnessError, Result};
pub use eval::{evaluate, EvalReport};
pub use train::{run_training, TrainSummary};
