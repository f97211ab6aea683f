//! A deterministic 2.5D world for vision-based obstacle avoidance.
//!
//! The world is an occupancy grid of square cells. A disc-shaped robot moves
//! with unicycle kinematics, a 270° range finder measures ray distances to
//! the nearest wall, and a column raycaster renders grayscale and depth
//! frames. All sensors are pure functions of `(map, pose)`.
//!
//! Coordinates: cell `(col, row)` covers `x ∈ [col·s, (col+1)·s)` and
//! `y ∈ [row·s, (row+1)·s)` for cell size `s`. Headings are counter-clockwise
//! in the `x`-`y` plane, so positive angular velocity turns left.

pub mod camera;
pub mod error;
pub mod geometry;
pub mod map;
pub mod maps;
pub mod pgm;
pub mod reward;
pub mod scan;
pub mod spawn;

pub use camera::{render_camera, CameraConfig, Frame};
pub use error::{MapError, SimError};
pub use geometry::{cast_ray, check_collision, step_kinematics, wrap_angle, Pose};
pub use map::{GridMap, SpawnAnchor};
pub use reward::{center_deviation, compute_reward, CdMode, R_COLLISION};
pub use scan::{range_scan, RangeScan, SCAN_FOV, SCAN_RAYS};
pub use spawn::{spawn, SpawnMode};

/// Robot footprint radius in meters.
pub const ROBOT_RADIUS: f64 = 0.18;
/// Default cell edge in meters.
pub const CELL_SIZE: f64 = 0.5;
/// Control period in seconds.
pub const DT: f64 = 0.2;
/// Range finder and camera far limit in meters.
pub const D_MAX: f64 = 8.0;
