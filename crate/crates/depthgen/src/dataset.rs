//! Paired (gray, depth) frames rendered from the same map and pose.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use simworld::{check_collision, pgm, render_camera, spawn, CameraConfig, Frame, GridMap, Pose, SpawnMode, ROBOT_RADIUS};

use crate::error::{DepthError, Result};

/// Headings tried per free cell by [`PosePolicy::Scan`].
pub const SCAN_HEADINGS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosePolicy {
    /// Rejection-sampled collision-free spawns.
    RandomSafe,
    /// Cell centres × evenly spaced headings, subsampled at a fixed stride.
    Scan,
}

impl PosePolicy {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "random_safe" => Some(PosePolicy::RandomSafe),
            "scan" => Some(PosePolicy::Scan),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthPair {
    pub pose: Pose,
    pub gray: Frame,
    pub depth: Frame,
}

/// Pairs in capture order; the last `n / 10` form the holdout split.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDataset {
    pub pairs: Vec<DepthPair>,
}

impl PairDataset {
    pub fn new(pairs: Vec<DepthPair>) -> Self {
        PairDataset { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn holdout_len(&self) -> usize {
        self.pairs.len() / 10
    }

    pub fn train_indices(&self) -> std::ops::Range<usize> {
        0..self.pairs.len() - self.holdout_len()
    }

    pub fn holdout_indices(&self) -> std::ops::Range<usize> {
        self.pairs.len() - self.holdout_len()..self.pairs.len()
    }

    pub fn train(&self) -> &[DepthPair] {
        &self.pairs[self.train_indices()]
    }

    pub fn holdout(&self) -> &[DepthPair] {
        &self.pairs[self.holdout_indices()]
    }

    pub fn frame_size(&self) -> Option<(usize, usize)> {
        self.pairs.first().map(|p| (p.gray.height, p.gray.width))
    }

    /// Writes `NNNN_gray.pgm`, `NNNN_depth.pgm` and `index.txt` with one
    /// `x y theta` line per pair.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut index = String::new();
        for (i, p) in self.pairs.iter().enumerate() {
            pgm::write(&dir.join(format!("{i:04}_gray.pgm")), &p.gray)?;
            pgm::write(&dir.join(format!("{i:04}_depth.pgm")), &p.depth)?;
            writeln!(index, "{:?} {:?} {:?}", p.pose.x, p.pose.y, p.pose.theta).expect("string write");
        }
        fs::write(dir.join("index.txt"), index)?;
        Ok(())
    }

    /// Inverse of [`PairDataset::save`]; frames come back 8-bit quantized.
    pub fn load(dir: &Path) -> Result<Self> {
        let index = fs::read_to_string(dir.join("index.txt"))?;
        let mut pairs = Vec::new();
        for (i, line) in index.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| DepthError::Dataset(format!("index.txt line {}: {e}", i + 1)))?;
            if vals.len() != 3 {
                return Err(DepthError::Dataset(format!(
                    "index.txt line {}: expected `x y theta`",
                    i + 1
                )));
            }
            let gray = pgm::read(&dir.join(format!("{i:04}_gray.pgm")))?;
            let depth = pgm::read(&dir.join(format!("{i:04}_depth.pgm")))?;
            if (gray.width, gray.height) != (depth.width, depth.height) {
                return Err(DepthError::Dataset(format!("pair {i}: gray and depth sizes differ")));
            }
            pairs.push(DepthPair {
                pose: Pose::new(vals[0], vals[1], vals[2]),
                gray,
                depth,
            });
        }
        let ds = PairDataset { pairs };
        if let Some(size) = ds.frame_size() {
            if ds.pairs.iter().any(|p| (p.gray.height, p.gray.width) != size) {
                return Err(DepthError::Dataset("frames have mixed sizes".into()));
            }
        }
        Ok(ds)
    }
}

fn scan_poses(map: &GridMap) -> Vec<Pose> {
    let mut poses = Vec::new();
    for (col, row) in map.free_cells() {
        let (x, y) = map.cell_center(col, row);
        for k in 0..SCAN_HEADINGS {
            let theta = std::f64::consts::TAU * k as f64 / SCAN_HEADINGS as f64;
            let pose = Pose::new(x, y, theta);
            if !check_collision(map, &pose, ROBOT_RADIUS) {
                poses.push(pose);
            }
        }
    }
    poses
}

/// Renders `n` pairs. `Scan` ignores `rng` and spreads `n` picks evenly over
/// the candidate grid, wrapping around when `n` exceeds it.
pub fn collect_pairs<R: Rng + ?Sized>(
    map: &GridMap,
    n: usize,
    rng: &mut R,
    policy: PosePolicy,
    camera: &CameraConfig,
) -> Result<PairDataset> {
    if n == 0 {
        return Err(DepthError::Config("pair count must be at least 1".into()));
    }
    let poses = match policy {
        PosePolicy::RandomSafe => (0..n)
            .map(|_| spawn(map, rng, SpawnMode::Random, ROBOT_RADIUS))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        PosePolicy::Scan => {
            let grid = scan_poses(map);
            if grid.is_empty() {
                return Err(DepthError::Dataset("map has no collision-free scan pose".into()));
            }
            (0..n).map(|i| grid[(i * grid.len() / n.min(grid.len())) % grid.len()]).collect::<Vec<_>>()
        }
    };
    let pairs = poses
        .into_iter()
        .map(|pose| {
            let (gray, depth) = render_camera(map, &pose, camera);
            DepthPair { pose, gray, depth }
        })
        .collect();
    Ok(PairDataset { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circuit() -> GridMap {
        GridMap::parse(simworld::maps::CIRCUIT2).unwrap()
    }

    #[test]
    fn split_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = collect_pairs(&circuit(), 100, &mut rng, PosePolicy::RandomSafe, &CameraConfig::with_size(16)).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.holdout().len(), 10);
        assert_eq!(ds.train().len(), 90);
        assert_eq!(ds.train_indices().end, ds.holdout_indices().start);
    }

    #[test]
    fn zero_pairs_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(collect_pairs(&circuit(), 0, &mut rng, PosePolicy::Scan, &CameraConfig::default()).is_err());
    }

    #[test]
    fn scan_is_seed_independent_and_distinct() {
        let cam = CameraConfig::with_size(16);
        let a = collect_pairs(&circuit(), 40, &mut ChaCha8Rng::seed_from_u64(1), PosePolicy::Scan, &cam).unwrap();
        let b = collect_pairs(&circuit(), 40, &mut ChaCha8Rng::seed_from_u64(2), PosePolicy::Scan, &cam).unwrap();
        assert_eq!(a, b);
        let mut seen: Vec<_> = a.pairs.iter().map(|p| (p.pose.x.to_bits(), p.pose.y.to_bits(), p.pose.theta.to_bits())).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 40);
    }
}
