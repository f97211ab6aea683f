use std::f64::consts::TAU;

use rand::Rng;

use crate::error::SimError;
use crate::geometry::{check_collision, Pose};
use crate::map::GridMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpawnMode {
    /// Uniform free cell, uniform position inside it, uniform heading;
    /// rejected until collision-free.
    Random,
    /// The map's fixed evaluation anchor.
    EvalAnchor,
}

const MAX_ATTEMPTS: usize = 100_000;

pub fn spawn<R: Rng + ?Sized>(map: &GridMap, rng: &mut R, mode: SpawnMode, radius: f64) -> Result<Pose, SimError> {
    match mode {
        SpawnMode::EvalAnchor => {
            let a = map.anchor().ok_or(SimError::MissingAnchor)?;
            let (x, y) = map.cell_center(a.col, a.row);
            Ok(Pose::new(x, y, a.theta))
        }
        SpawnMode::Random => {
            let free = map.free_cells();
            let s = map.cell_size();
            for _ in 0..MAX_ATTEMPTS {
                let (col, row) = free[rng.gen_range(0..free.len())];
                let x = (col as f64 + rng.gen::<f64>()) * s;
                let y = (row as f64 + rng.gen::<f64>()) * s;
                let theta = rng.gen_range(0.0..TAU);
                let pose = Pose::new(x, y, theta);
                if !check_collision(map, &pose, radius) {
                    return Ok(pose);
                }
            }
            Err(SimError::Spawn(format!(
                "no collision-free pose found in {MAX_ATTEMPTS} attempts"
            )))
        }
    }
}
