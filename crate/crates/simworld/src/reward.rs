use crate::scan::{RangeScan, SCAN_RAYS};

pub const R_COLLISION: f64 = -1.0;

/// How the two halves of the scan are summarized before differencing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CdMode {
    /// Per-half mean distance.
    #[default]
    Mean,
    /// Per-half summed distance.
    Sum,
}

/// Centre deviation: absolute difference between the right half (rays
/// 0..50) and the left half (rays 50..100) of the scan.
pub fn center_deviation(scan: &RangeScan, mode: CdMode) -> f64 {
    let half = SCAN_RAYS / 2;
    let right: f64 = scan.ranges[..half].iter().sum();
    let left: f64 = scan.ranges[half..].iter().sum();
    let diff = (right - left).abs();
    match mode {
        CdMode::Mean => diff / half as f64,
        CdMode::Sum => diff,
    }
}

/// Per-step reward: `r_collision` on collision, otherwise
/// `(1 / (c_d + 1))² + ½ v cos ω`.
pub fn compute_reward(collided: bool, c_d: f64, v: f64, omega: f64) -> f64 {
    if collided {
        R_COLLISION
    } else {
        (1.0 / (c_d + 1.0)).powi(2) + 0.5 * v * omega.cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_6;

    fn scan(right: f64, left: f64) -> RangeScan {
        let mut ranges = vec![right; SCAN_RAYS / 2];
        ranges.extend(vec![left; SCAN_RAYS / 2]);
        RangeScan { ranges }
    }

    #[test]
    fn reward_examples() {
        assert_eq!(compute_reward(true, 0.3, 0.3, 0.0), -1.0);
        assert!((compute_reward(false, 0.0, 0.3, 0.0) - 1.15).abs() < 1e-9);
        let r = compute_reward(false, 1.0, 0.05, FRAC_PI_6);
        assert!((r - (0.25 + 0.025 * FRAC_PI_6.cos())).abs() < 1e-12);
        assert!((r - 0.27165).abs() < 1e-5);
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(center_deviation(&scan(1.3, 1.3), CdMode::Mean), 0.0);
        assert!((center_deviation(&scan(2.0, 1.5), CdMode::Mean) - 0.5).abs() < 1e-12);
        assert!((center_deviation(&scan(2.0, 1.5), CdMode::Sum) - 25.0).abs() < 1e-9);
    }

    #[test]
    fn deviation_is_mirror_invariant() {
        let ranges: Vec<f64> = (0..SCAN_RAYS).map(|i| 0.5 + (i * 7 % 13) as f64 * 0.3).collect();
        let mirrored: Vec<f64> = ranges.iter().rev().copied().collect();
        let a = center_deviation(&RangeScan { ranges }, CdMode::Mean);
        let b = center_deviation(&RangeScan { ranges: mirrored }, CdMode::Mean);
        assert!((a - b).abs() < 1e-12);
    }
}
