use std::f64::consts::PI;

use crate::geometry::{cast_ray, Pose};
use crate::map::GridMap;

pub const SCAN_RAYS: usize = 100;
/// Total angular span of the range finder (270°).
pub const SCAN_FOV: f64 = 1.5 * PI;

/// Range-finder reading, index 0 at heading −135° (rightmost), index 99 at
/// +135° (leftmost).
#[derive(Clone, Debug, PartialEq)]
pub struct RangeScan {
    pub ranges: Vec<f64>,
}

impl RangeScan {
    /// Angle of ray `i` relative to the heading.
    pub fn ray_offset(i: usize) -> f64 {
        -SCAN_FOV / 2.0 + i as f64 * SCAN_FOV / (SCAN_RAYS - 1) as f64
    }
}

pub fn range_scan(map: &GridMap, pose: &Pose, d_max: f64) -> RangeScan {
    RangeScan {
        ranges: (0..SCAN_RAYS)
            .map(|i| cast_ray(map, pose.x, pose.y, pose.theta + RangeScan::ray_offset(i), d_max))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::D_MAX;

    fn corridor() -> GridMap {
        // free rows 1..=2 (y in [0.5, 1.5)), long in x
        let row_wall = "#".repeat(30);
        let row_free = format!("#{}#", ".".repeat(28));
        GridMap::parse(&format!("{row_wall}\n{row_free}\n{row_free}\n{row_wall}\n")).unwrap()
    }

    #[test]
    fn centered_corridor_scan_is_mirror_symmetric() {
        let m = corridor();
        let scan = range_scan(&m, &Pose::new(7.5, 1.0, 0.0), D_MAX);
        assert_eq!(scan.ranges.len(), SCAN_RAYS);
        for i in 0..SCAN_RAYS / 2 {
            let (a, b) = (scan.ranges[i], scan.ranges[SCAN_RAYS - 1 - i]);
            assert!((a - b).abs() < 1e-6, "ray {i}: {a} vs {b}");
        }
    }

    #[test]
    fn readings_are_positive_and_capped() {
        let m = corridor();
        let scan = range_scan(&m, &Pose::new(3.3, 0.8, 0.4), D_MAX);
        assert!(scan.ranges.iter().all(|&d| d > 0.0 && d <= D_MAX));
    }

    #[test]
    fn ray_offsets_span_270_degrees() {
        assert!((RangeScan::ray_offset(0) + 0.75 * PI).abs() < 1e-15);
        assert!((RangeScan::ray_offset(SCAN_RAYS - 1) - 0.75 * PI).abs() < 1e-12);
    }
}
