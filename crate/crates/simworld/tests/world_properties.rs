use std::f64::consts::{FRAC_PI_6, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simworld::camera::column_hits;
use simworld::{
    check_collision, compute_reward, maps, range_scan, render_camera, spawn, CameraConfig, GridMap, Pose,
    SpawnMode, D_MAX, ROBOT_RADIUS, SCAN_RAYS,
};

fn square_room(n: usize) -> GridMap {
    let mut text = String::new();
    for r in 0..n + 2 {
        for c in 0..n + 2 {
            text.push(if r == 0 || c == 0 || r == n + 1 || c == n + 1 { '#' } else { '.' });
        }
        text.push('\n');
    }
    GridMap::parse(&text).unwrap()
}

#[test]
fn approach_sweep_flips_collision_once() {
    let map = square_room(6); // free x in [0.5, 3.5)
    let mut flips = 0;
    let mut prev = false;
    let mut x = 1.75;
    while x < 3.49 {
        let hit = check_collision(&map, &Pose::new(x, 1.75, 0.0), ROBOT_RADIUS);
        if hit != prev {
            flips += 1;
            // brute-force distance to the wall face at x = 3.5
            assert!((3.5 - x) < ROBOT_RADIUS + 1e-3 && (3.5 - x) > ROBOT_RADIUS - 1e-3);
        }
        prev = hit;
        x += 1e-3;
    }
    assert_eq!(flips, 1);
}

#[test]
fn rotating_by_scan_increment_shifts_index() {
    let map = square_room(6);
    let inc = simworld::SCAN_FOV / (SCAN_RAYS - 1) as f64;
    let base = Pose::new(1.9, 1.4, 0.7);
    let a = range_scan(&map, &base, D_MAX);
    let b = range_scan(&map, &Pose::new(base.x, base.y, base.theta + inc), D_MAX);
    for i in 0..SCAN_RAYS - 1 {
        assert!((b.ranges[i] - a.ranges[i + 1]).abs() < 1e-6, "index {i}");
    }
}

#[test]
fn spawn_headings_are_uniform() {
    let map = GridMap::parse(maps::CIRCUIT2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let mut bins = [0usize; 20];
    for _ in 0..n {
        let p = spawn(&map, &mut rng, SpawnMode::Random, ROBOT_RADIUS).unwrap();
        assert!(!check_collision(&map, &p, ROBOT_RADIUS));
        assert!((0.0..TAU).contains(&p.theta));
        bins[(p.theta / TAU * 20.0) as usize] += 1;
    }
    let expected = n as f64 / 20.0;
    let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // chi-square critical value, 19 dof, p = 0.01
    assert!(chi2 < 36.191, "chi2 = {chi2}");
}

#[test]
fn spawn_is_deterministic_and_anchor_is_fixed() {
    let map = GridMap::parse(maps::MAZE).unwrap();
    let a = spawn(&map, &mut ChaCha8Rng::seed_from_u64(5), SpawnMode::Random, ROBOT_RADIUS).unwrap();
    let b = spawn(&map, &mut ChaCha8Rng::seed_from_u64(5), SpawnMode::Random, ROBOT_RADIUS).unwrap();
    assert_eq!(a, b);
    let e1 = spawn(&map, &mut ChaCha8Rng::seed_from_u64(1), SpawnMode::EvalAnchor, ROBOT_RADIUS).unwrap();
    let e2 = spawn(&map, &mut ChaCha8Rng::seed_from_u64(2), SpawnMode::EvalAnchor, ROBOT_RADIUS).unwrap();
    assert_eq!(e1, e2);
    assert!(!check_collision(&map, &e1, ROBOT_RADIUS));

    let bare = square_room(3);
    let err = spawn(&bare, &mut ChaCha8Rng::seed_from_u64(0), SpawnMode::EvalAnchor, ROBOT_RADIUS);
    assert!(matches!(err, Err(simworld::SimError::MissingAnchor)));
}

#[test]
fn frames_are_translation_invariant() {
    let small = GridMap::parse("######\n#....#\n#.##.#\n#....#\n######\n").unwrap();
    // the same layout shifted by two cells right and one down inside a larger wall block
    let big = GridMap::parse(
        "########\n########\n###....#\n###.##.#\n###....#\n########\n",
    )
    .unwrap();
    let cfg = CameraConfig::default();
    let p = Pose::new(0.75, 0.8, 0.4);
    let q = Pose::new(0.75 + 1.0, 0.8 + 0.5, 0.4);
    assert_eq!(render_camera(&small, &p, &cfg), render_camera(&big, &q, &cfg));
    assert_eq!(range_scan(&small, &p, D_MAX), range_scan(&big, &q, D_MAX));
}

#[test]
fn exported_depth_reproduces_column_distance() {
    let map = GridMap::parse(maps::CIRCUIT2).unwrap();
    let cfg = CameraConfig::default();
    let pose = Pose::new(3.1, 0.9, 0.2);
    let (_, depth) = render_camera(&map, &pose, &cfg);
    let exported = simworld::pgm::decode(&simworld::pgm::encode(&depth)).unwrap();
    let row = cfg.height / 2;
    for (c, hit) in column_hits(&map, &pose, &cfg).iter().enumerate() {
        if hit.distance < cfg.far {
            let d = hit.distance.clamp(cfg.near, cfg.far);
            assert!((depth.get(row, c) as f64 * 8.0 - d).abs() < 1e-5);
            assert!((exported.get(row, c) as f64 - d / 8.0).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}

proptest! {
    #[test]
    fn step_reward_is_bounded(cd in 0.0f64..50.0, v in 0.05f64..=0.3, w in -FRAC_PI_6..=FRAC_PI_6) {
        let r = compute_reward(false, cd, v, w);
        prop_assert!(r > 0.0 && r <= 1.15 + 1e-12);
    }

    #[test]
    fn cast_ray_never_exceeds_straight_line_to_wall(x in 0.6f64..3.4, y in 0.6f64..3.4, a in 0.0f64..TAU) {
        let map = square_room(6);
        let d = simworld::cast_ray(&map, x, y, a, D_MAX);
        // the point just past the hit is inside a wall
        let (px, py) = (x + (d + 1e-9) * a.cos(), y + (d + 1e-9) * a.sin());
        prop_assert!(map.is_occupied((px / 0.5).floor() as i64, (py / 0.5).floor() as i64));
        // every point strictly before the hit is free
        let (qx, qy) = (x + (d - 1e-6) * a.cos(), y + (d - 1e-6) * a.sin());
        prop_assert!(!map.is_occupied((qx / 0.5).floor() as i64, (qy / 0.5).floor() as i64));
    }
}
