//! Gray→depth translation for the predicted-depth and fused sensor modes.
//!
//! [`collect_pairs`] renders aligned frames from the simulator,
//! [`train_depth`] fits a skip-connected generator (optionally against a
//! patch critic) and [`DepthModel`] serves predictions to the environment.

pub mod dataset;
pub mod error;
pub mod model;
pub mod train;
pub mod unet;

pub use dataset::{collect_pairs, DepthPair, PairDataset, PosePolicy};
pub use error::{DepthError, Result};
pub use model::{evaluate_depth, frame_l1, DepthEval, DepthModel, DEFAULT_BASE_WIDTH};
pub use train::{train_depth, DepthTraining, EpochLosses, GanMode, GanTrainConfig};
pub use unet::{Discriminator, Generator};
