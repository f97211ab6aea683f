//! Column raycasting camera.
//!
//! Each image column casts one ray across the horizontal field of view. A
//! wall hit at Euclidean distance `d` and perpendicular distance `d⊥` draws a
//! vertical band of height `k / d⊥` pixels centred on the horizon, where `k`
//! is the focal length in pixels times the wall height. Band pixels are
//! shaded `0.2 + 0.8·(1 − clamp(d)/far)`; the ceiling is 0.65 and the floor
//! 0.35. The depth frame carries `clamp(d)/far` on wall pixels and 1.0
//! elsewhere.

use crate::geometry::{cast_ray, Pose};
use crate::map::GridMap;

pub const FLOOR_INTENSITY: f32 = 0.35;
pub const CEILING_INTENSITY: f32 = 0.65;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub near: f64,
    pub far: f64,
    /// Wall height in meters with the camera at mid-height.
    pub wall_height: f64,
    /// Render at `supersample`× resolution and box-filter down.
    pub supersample: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            width: 84,
            height: 84,
            fov: 80f64.to_radians(),
            near: 0.05,
            far: 8.0,
            wall_height: 1.0,
            supersample: 1,
        }
    }
}

impl CameraConfig {
    pub fn with_size(size: usize) -> Self {
        CameraConfig {
            width: size,
            height: size,
            ..Default::default()
        }
    }

    /// Focal length in pixels (square pixels).
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov / 2.0).tan()
    }

    /// Ray angle of column `c` relative to the heading. Column 0 is the left
    /// edge; column `width / 2` looks straight ahead.
    pub fn column_offset(&self, c: usize) -> f64 {
        let screen = 1.0 - 2.0 * c as f64 / self.width as f64;
        (screen * (self.fov / 2.0).tan()).atan()
    }
}

/// Single-channel image with values in `[0, 1]`, row-major, row 0 at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Frame {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    /// Box-filter downsampling by an integer factor.
    pub fn downsample(&self, factor: usize) -> Frame {
        if factor <= 1 {
            return self.clone();
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = 1.0 / (factor * factor) as f32;
        let mut data = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for dr in 0..factor {
                    for dc in 0..factor {
                        acc += self.get(r * factor + dr, c * factor + dc);
                    }
                }
                data.push(acc * norm);
            }
        }
        Frame { width: w, height: h, data }
    }
}

/// Per-column hit information, exposed for cross-checks against the frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnHit {
    /// Euclidean ray distance (capped at `far`).
    pub distance: f64,
    pub perpendicular: f64,
    /// Wall band height in pixels, in `[0, height]`.
    pub band: f64,
}

pub fn column_hits(map: &GridMap, pose: &Pose, cfg: &CameraConfig) -> Vec<ColumnHit> {
    let k = cfg.focal_px() * cfg.wall_height;
    (0..cfg.width)
        .map(|c| {
            let offset = cfg.column_offset(c);
            let distance = cast_ray(map, pose.x, pose.y, pose.theta + offset, cfg.far);
            let perpendicular = distance * offset.cos();
            let band = if distance >= cfg.far {
                0.0
            } else {
                (k / perpendicular.max(1e-9)).clamp(0.0, cfg.height as f64)
            };
            ColumnHit {
                distance,
                perpendicular,
                band,
            }
        })
        .collect()
}

fn render_native(map: &GridMap, pose: &Pose, cfg: &CameraConfig) -> (Frame, Frame) {
    let (w, h) = (cfg.width, cfg.height);
    let mut gray = Frame::filled(w, h, 0.0);
    let mut depth = Frame::filled(w, h, 1.0);
    let horizon = h as f64 / 2.0;
    for (c, hit) in column_hits(map, pose, cfg).iter().enumerate() {
        let clamped = hit.distance.clamp(cfg.near, cfg.far);
        let wall_depth = (clamped / cfg.far) as f32;
        let wall_shade = (0.2 + 0.8 * (1.0 - clamped / cfg.far)) as f32;
        for r in 0..h {
            let centre = r as f64 + 0.5 - horizon;
            let idx = r * w + c;
            if centre.abs() < hit.band / 2.0 {
                gray.data[idx] = wall_shade;
                depth.data[idx] = wall_depth;
            } else if centre < 0.0 {
                gray.data[idx] = CEILING_INTENSITY;
            } else {
                gray.data[idx] = FLOOR_INTENSITY;
            }
        }
    }
    (gray, depth)
}

/// Renders the grayscale and ground-truth depth frames seen from `pose`.
pub fn render_camera(map: &GridMap, pose: &Pose, cfg: &CameraConfig) -> (Frame, Frame) {
    if cfg.supersample <= 1 {
        return render_native(map, pose, cfg);
    }
    let big = CameraConfig {
        width: cfg.width * cfg.supersample,
        height: cfg.height * cfg.supersample,
        supersample: 1,
        ..*cfg
    };
    let (g, d) = render_native(map, pose, &big);
    (g.downsample(cfg.supersample), d.downsample(cfg.supersample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cast_ray;

    fn room() -> GridMap {
        GridMap::parse(
            "##########\n#........#\n#........#\n#........#\n#........#\n#........#\n##########\n",
        )
        .unwrap()
    }

    #[test]
    fn wall_at_near_clip_fills_column() {
        let m = room();
        // wall face at x = 4.5, robot 0.05 m away facing it
        let (gray, depth) = render_camera(&m, &Pose::new(4.45, 1.75, 0.0), &CameraConfig::default());
        let c = 42;
        for r in 0..84 {
            assert!((depth.get(r, c) - 0.00625).abs() < 1e-6);
            assert!((gray.get(r, c) - 0.995).abs() < 1e-6);
        }
    }

    #[test]
    fn center_column_matches_heading_ray() {
        let m = room();
        let cfg = CameraConfig::default();
        for &(x, y, th) in &[(1.3, 1.1, 0.3), (2.2, 2.9, 2.0), (3.9, 1.7, 4.4)] {
            let pose = Pose::new(x, y, th);
            let hits = column_hits(&m, &pose, &cfg);
            let ray = cast_ray(&m, x, y, pose.theta, cfg.far);
            assert!((hits[cfg.width / 2].distance - ray).abs() < 1e-6);
            let (_, depth) = render_camera(&m, &pose, &cfg);
            let d = depth.get(cfg.height / 2, cfg.width / 2) as f64 * cfg.far;
            assert!((d - ray.clamp(cfg.near, cfg.far)).abs() < 1e-5);
        }
    }

    #[test]
    fn values_are_in_unit_range_and_pure() {
        let m = room();
        let pose = Pose::new(2.0, 1.5, 1.0);
        let (g1, d1) = render_camera(&m, &pose, &CameraConfig::default());
        let (g2, d2) = render_camera(&m, &pose, &CameraConfig::default());
        assert_eq!((&g1, &d1), (&g2, &d2));
        assert!(g1.data.iter().chain(&d1.data).all(|v| (0.0..=1.0).contains(v)));
        // non-wall depth is 1.0 and those pixels are floor or ceiling
        for (g, d) in g1.data.iter().zip(&d1.data) {
            if *d == 1.0 {
                assert!(*g == FLOOR_INTENSITY || *g == CEILING_INTENSITY);
            }
        }
    }

    #[test]
    fn supersampled_render_has_target_size() {
        let m = room();
        let cfg = CameraConfig {
            supersample: 4,
            ..CameraConfig::with_size(32)
        };
        let (g, d) = render_camera(&m, &Pose::new(2.0, 1.5, 0.0), &cfg);
        assert_eq!((g.width, g.height, d.data.len()), (32, 32, 1024));
    }
}
