use std::f64::consts::TAU;

use crate::map::GridMap;

/// Planar robot pose: position in meters, heading in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Unicycle update using the heading at the start of the step. No collision
/// handling.
pub fn step_kinematics(pose: Pose, v: f64, omega: f64, dt: f64) -> Pose {
    Pose {
        x: pose.x + v * pose.theta.cos() * dt,
        y: pose.y + v * pose.theta.sin() * dt,
        theta: wrap_angle(pose.theta + omega * dt),
    }
}

/// True iff some occupied cell lies closer than `radius` to `(x, y)`.
pub fn check_collision(map: &GridMap, pose: &Pose, radius: f64) -> bool {
    let s = map.cell_size();
    let c0 = ((pose.x - radius) / s).floor() as i64;
    let c1 = ((pose.x + radius) / s).floor() as i64;
    let r0 = ((pose.y - radius) / s).floor() as i64;
    let r1 = ((pose.y + radius) / s).floor() as i64;
    for row in r0..=r1 {
        for col in c0..=c1 {
            if !map.is_occupied(col, row) {
                continue;
            }
            let (x0, x1) = (col as f64 * s, (col + 1) as f64 * s);
            let (y0, y1) = (row as f64 * s, (row + 1) as f64 * s);
            let dx = (x0 - pose.x).max(pose.x - x1).max(0.0);
            let dy = (y0 - pose.y).max(pose.y - y1).max(0.0);
            if dx * dx + dy * dy < radius * radius {
                return true;
            }
        }
    }
    false
}

/// Grid traversal (Amanatides–Woo DDA) from `(x, y)` along `angle`; returns
/// the Euclidean distance to the first occupied cell boundary, capped at
/// `d_max`. Returns 0 when the origin itself is inside a wall.
pub fn cast_ray(map: &GridMap, x: f64, y: f64, angle: f64, d_max: f64) -> f64 {
    let s = map.cell_size();
    let (dy, dx) = angle.sin_cos();
    let mut col = (x / s).floor() as i64;
    let mut row = (y / s).floor() as i64;
    if map.is_occupied(col, row) {
        return 0.0;
    }
    let step_c: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dy > 0.0 { 1 } else { -1 };

    // Distance along the ray to the next vertical / horizontal grid line,
    // computed from the boundary coordinate each time to avoid drift.
    let next_x = |col: i64| -> f64 {
        if dx == 0.0 {
            f64::INFINITY
        } else {
            let boundary = if dx > 0.0 { (col + 1) as f64 * s } else { col as f64 * s };
            (boundary - x) / dx
        }
    };
    let next_y = |row: i64| -> f64 {
        if dy == 0.0 {
            f64::INFINITY
        } else {
            let boundary = if dy > 0.0 { (row + 1) as f64 * s } else { row as f64 * s };
            (boundary - y) / dy
        }
    };

    loop {
        let tx = next_x(col);
        let ty = next_y(row);
        let t = if tx < ty {
            col += step_c;
            tx
        } else {
            row += step_r;
            ty
        };
        if t >= d_max {
            return d_max;
        }
        if map.is_occupied(col, row) {
            return t.max(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI};

    fn room(cols: usize, rows: usize) -> GridMap {
        let mut text = String::new();
        for r in 0..rows + 2 {
            for c in 0..cols + 2 {
                let wall = r == 0 || c == 0 || r == rows + 1 || c == cols + 1;
                text.push(if wall { '#' } else { '.' });
            }
            text.push('\n');
        }
        GridMap::parse(&text).unwrap()
    }

    #[test]
    fn kinematics_examples() {
        let p = step_kinematics(Pose::new(0.0, 0.0, 0.0), 0.3, 0.0, 0.2);
        assert!((p.x - 0.06).abs() < 1e-15 && p.y == 0.0 && p.theta == 0.0);
        let p = step_kinematics(Pose::new(0.0, 0.0, 0.0), 0.0, FRAC_PI_6, 0.2);
        assert!((p.theta - PI / 30.0).abs() < 1e-15);
        let p = step_kinematics(Pose::new(0.0, 0.0, TAU - 0.01), 0.0, 0.1, 0.2);
        assert!((p.theta - 0.01).abs() < 1e-12);
    }

    #[test]
    fn wrap_stays_in_range() {
        for v in [-1e-18, -TAU, TAU, 3.0 * TAU + 0.5, -0.5] {
            let w = wrap_angle(v);
            assert!((0.0..TAU).contains(&w), "{v} -> {w}");
        }
    }

    #[test]
    fn collision_examples() {
        // 3x3 free cells: x, y in [0.5, 2.0]
        let m = room(3, 3);
        assert!(!check_collision(&m, &Pose::new(1.25, 1.25, 0.0), 0.18));
        // 0.1 m from the wall face at x = 0.5
        assert!(check_collision(&m, &Pose::new(0.6, 1.25, 0.0), 0.18));
        // inside a wall
        assert!(check_collision(&m, &Pose::new(0.25, 1.25, 0.0), 0.18));
    }

    #[test]
    fn axis_aligned_ray() {
        // free x in [0.5, 3.0): wall face at x = 3.0
        let m = room(5, 5);
        let d = cast_ray(&m, 1.0, 1.0, 0.0, 8.0);
        assert!((d - 2.0).abs() < 1e-9, "{d}");
        let d = cast_ray(&m, 1.0, 1.0, PI, 8.0);
        assert!((d - 0.5).abs() < 1e-9, "{d}");
        let d = cast_ray(&m, 1.0, 1.0, PI / 2.0, 8.0);
        assert!((d - 2.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn diagonal_ray() {
        // free x, y in [0.5, 2.0): walls at x = 2.0 and y = 2.0, hit at the corner
        let m = room(3, 3);
        let d = cast_ray(&m, 1.0, 1.0, FRAC_PI_4, 8.0);
        assert!((d - 2f64.sqrt()).abs() < 1e-9, "{d}");
        // a 45° ray in a wider room meets the x = 2.0 face first
        let m = room(3, 6);
        let d = cast_ray(&m, 1.0, 1.0, FRAC_PI_4, 8.0);
        assert!((d - 2f64.sqrt()).abs() < 1e-9, "{d}");
    }

    #[test]
    fn long_corridor_is_capped() {
        let m = room(40, 1);
        let d = cast_ray(&m, 0.75, 0.75, 0.0, 8.0);
        assert_eq!(d, 8.0);
    }
}
