use std::f64::consts::PI;
use std::sync::Arc;

use envapi::action::map_continuous;
use envapi::{Action, ActionSpace, Env, EnvConfig, EpisodeConfig, SensorMode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simworld::{maps, render_camera, GridMap, Pose, SpawnMode};

fn config(sensor: SensorMode, actions: ActionSpace) -> EnvConfig {
    EnvConfig {
        episode: EpisodeConfig {
            sensor,
            ..Default::default()
        },
        actions,
        obs_size: 32,
        ..Default::default()
    }
}

fn circuit() -> Arc<GridMap> {
    Arc::new(GridMap::parse(maps::CIRCUIT2).unwrap())
}

fn open_room() -> Arc<GridMap> {
    let mut text = String::new();
    for r in 0..12 {
        for c in 0..12 {
            text.push(if r == 0 || c == 0 || r == 11 || c == 11 { '#' } else { '.' });
        }
        text.push('\n');
    }
    Arc::new(GridMap::parse(&text).unwrap())
}

#[test]
fn driving_into_a_close_wall_ends_the_episode() {
    let mut env = Env::new(open_room(), config(SensorMode::Gray, ActionSpace::disc5()), 0, None).unwrap();
    // front of the robot 0.05 m from the wall face at x = 5.5
    env.reset_to(Pose::new(5.5 - 0.18 - 0.05, 3.0, 0.0)).unwrap();
    let r = env.step(Action::Discrete(0)).unwrap();
    assert!(r.done && r.info.collided);
    assert_eq!(r.reward, -1.0);
}

#[test]
fn circling_in_open_space_runs_to_the_step_cap() {
    let mut env = Env::new(open_room(), config(SensorMode::Gray, ActionSpace::disc5()), 0, None).unwrap();
    env.reset_to(Pose::new(3.0, 3.0, 0.0)).unwrap();
    let mut total = 0.0;
    let mut steps = 0;
    loop {
        let r = env.step(Action::Discrete(4)).unwrap();
        total += r.reward;
        steps += 1;
        if r.done {
            assert!(!r.info.collided);
            assert!(r.reward > 0.0);
            break;
        }
    }
    assert_eq!(steps, 2000);
    assert!(total <= 1.15 * 2000.0);
}

fn random_episodes(seed: u64, episodes: usize) -> Vec<(Vec<u32>, Vec<u64>)> {
    let mut env = Env::new(circuit(), config(SensorMode::Gray, ActionSpace::disc5()), seed, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let mut out = Vec::new();
    for _ in 0..episodes {
        let s = env.reset(SpawnMode::Random).unwrap();
        let mut states: Vec<u32> = s.data().iter().map(|v| v.to_bits()).collect();
        let mut rewards = Vec::new();
        loop {
            let r = env.step(Action::Discrete(rng.gen_range(0..5))).unwrap();
            states.extend(r.state.data().iter().map(|v| v.to_bits()));
            rewards.push(r.reward.to_bits());
            if r.done {
                break;
            }
        }
        out.push((states, rewards));
    }
    out
}

#[test]
fn fixed_seed_traces_are_bit_reproducible() {
    assert_eq!(random_episodes(9, 3), random_episodes(9, 3));
}

#[test]
fn returns_are_bounded_and_state_comes_from_the_camera() {
    let mut env = Env::new(circuit(), config(SensorMode::Gray, ActionSpace::Continuous), 4, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        env.reset(SpawnMode::Random).unwrap();
        let mut total = 0.0;
        loop {
            let z = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let r = env.step(Action::Continuous(z)).unwrap();
            let (gray, _) = render_camera(env.map(), &env.pose(), env.camera());
            assert_eq!(&r.state.data()[3 * 1024..], &gray.data[..]);
            total += r.reward;
            if r.done {
                break;
            }
        }
        assert!((-1.0..=1.15 * 2000.0).contains(&total), "{total}");
    }
}

proptest! {
    #[test]
    fn continuous_mapping_stays_in_the_box(a in -50.0f64..50.0, b in -50.0f64..50.0, da in 0.0f64..5.0, db in 0.0f64..5.0) {
        let (v, w) = map_continuous([a, b]);
        prop_assert!((0.05..=0.3).contains(&v));
        prop_assert!((-PI / 6.0..=PI / 6.0).contains(&w));
        let (v2, w2) = map_continuous([a + da, b + db]);
        prop_assert!(v2 >= v && w2 >= w);
    }
}
