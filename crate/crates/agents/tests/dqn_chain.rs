use std::sync::Arc;

use agents::dqn::{DqnConfig, DqnLearner};
use agents::replay::{StoredState, Transition};
use nncore::{LayerSpec, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STATES: usize = 5;
const GAMMA: f64 = 0.9;

fn one_hot(s: usize) -> Vec<f32> {
    let mut v = vec![0.0; STATES];
    v[s] = 1.0;
    v
}

/// Deterministic chain: 0 = left, 1 = right; entering the last state pays 1
/// and ends the episode.
fn chain_step(s: usize, a: usize) -> (usize, f64, bool) {
    if a == 1 {
        let n = s + 1;
        (n, if n == STATES - 1 { 1.0 } else { 0.0 }, n == STATES - 1)
    } else {
        (s.saturating_sub(1), 0.0, false)
    }
}

fn value_iteration() -> Vec<[f64; 2]> {
    let mut q = vec![[0.0f64; 2]; STATES];
    for _ in 0..1000 {
        let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
        for (s, row) in q.iter_mut().enumerate().take(STATES - 1) {
            for (a, qa) in row.iter_mut().enumerate() {
                let (n, r, done) = chain_step(s, a);
                *qa = r + if done { 0.0 } else { GAMMA * v[n] };
            }
        }
    }
    q
}

#[test]
fn tabular_dqn_converges_to_value_iteration() {
    let net = Network::new(&[STATES], &[LayerSpec::dense(2)], 0).unwrap();
    let config = DqnConfig {
        gamma: GAMMA,
        lr: 1e-3,
        batch_size: 32,
        target_sync: 100,
        eps_decay_steps: 5_000,
        eps_end: 0.1,
        learn_start: 200,
        train_freq: 1,
        beta_anneal_steps: 20_000,
        capacity: 10_000,
        ..Default::default()
    };
    let mut learner = DqnLearner::new(net, config, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let states: Vec<Arc<StoredState>> = (0..STATES).map(|s| Arc::new(StoredState::quantize(&one_hot(s)))).collect();
    let mut s = rng.gen_range(0..STATES - 1);
    let mut t = 0;
    for _ in 0..20_000 {
        let x = Tensor::from_vec(&[STATES], one_hot(s)).unwrap();
        let eps = learner.epsilon();
        let a = learner.act(&x, eps).unwrap();
        let (n, r, done) = chain_step(s, a);
        learner
            .observe(Transition {
                state: states[s].clone(),
                action: a,
                reward: r,
                next_state: states[n].clone(),
                done,
            })
            .unwrap();
        t += 1;
        // random restarts; the 30-step cut is a truncation, not a terminal
        if done || t == 30 {
            s = rng.gen_range(0..STATES - 1);
            t = 0;
        } else {
            s = n;
        }
    }
    let q_star = value_iteration();
    for (s, want) in q_star.iter().enumerate().take(STATES - 1) {
        let q = learner.q_values(&Tensor::from_vec(&[STATES], one_hot(s)).unwrap()).unwrap();
        for a in 0..2 {
            assert!(
                (q[a] as f64 - want[a]).abs() < 1e-2,
                "Q({s},{a}) = {} vs {}",
                q[a],
                want[a]
            );
        }
    }
}

fn small_learner(epsilon_steps: u64) -> DqnLearner {
    let net = Network::new(&[3], &[LayerSpec::dense(8), LayerSpec::Relu, LayerSpec::DuelingHead { actions: 5 }], 3).unwrap();
    DqnLearner::new(
        net,
        DqnConfig {
            eps_decay_steps: epsilon_steps,
            learn_start: 10,
            batch_size: 4,
            target_sync: 20,
            capacity: 100,
            ..Default::default()
        },
        4,
    )
    .unwrap()
}

#[test]
fn full_exploration_is_uniform() {
    let mut l = small_learner(1_000_000);
    let x = Tensor::from_vec(&[3], vec![0.2, 0.5, 0.9]).unwrap();
    let mut counts = [0usize; 5];
    for _ in 0..10_000 {
        counts[l.act(&x, 1.0).unwrap()] += 1;
    }
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - 2000.0).powi(2) / 2000.0).sum();
    // 4 degrees of freedom, p = 0.01
    assert!(chi2 < 13.277, "chi2 {chi2}");
}

#[test]
fn zero_exploration_is_greedy_and_target_syncs_exactly() {
    let mut l = small_learner(1);
    let x = Tensor::from_vec(&[3], vec![0.2, 0.5, 0.9]).unwrap();
    let g = l.greedy(&x).unwrap();
    assert!((0..50).all(|_| l.act(&x, 0.0).unwrap() == g));
    let s = Arc::new(StoredState::quantize(&[0.2, 0.5, 0.9]));
    for i in 0..20 {
        l.observe(Transition {
            state: s.clone(),
            action: i % 5,
            reward: 1.0,
            next_state: s.clone(),
            done: i % 3 == 0,
        })
        .unwrap();
    }
    assert!(l.updates > 0);
    // step 20 is a sync step
    for (a, b) in l.online.params().iter().zip(l.target.params()) {
        assert_eq!(a.data(), b.data());
    }
}
