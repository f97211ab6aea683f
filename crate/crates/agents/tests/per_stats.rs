use std::sync::Arc;

use agents::replay::{PrioritizedReplay, ReplayConfig, StoredState, Transition};
use agents::sumtree::SumTree;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dummy() -> Transition {
    let s = Arc::new(StoredState::quantize(&[0.0]));
    Transition {
        state: s.clone(),
        action: 0,
        reward: 0.0,
        next_state: s,
        done: false,
    }
}

fn buffer(alpha: f64, priorities: &[f64]) -> PrioritizedReplay {
    let mut r = PrioritizedReplay::new(ReplayConfig {
        capacity: priorities.len(),
        alpha,
        epsilon: 1e-9,
    })
    .unwrap();
    for _ in priorities {
        r.push(dummy());
    }
    let idx: Vec<usize> = (0..priorities.len()).collect();
    let td: Vec<f64> = priorities.iter().map(|p| p - 1e-9).collect();
    r.update_priorities(&idx, &td);
    r
}

#[test]
fn sum_tree_is_exact_after_random_operations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tree = SumTree::new(3000);
    let mut shadow = vec![0.0f64; 3000];
    for _ in 0..10_000 {
        let i = rng.gen_range(0..3000);
        let v = rng.gen_range(0.0..10.0);
        tree.set(i, v);
        shadow[i] = v;
    }
    assert!(tree.is_consistent());
    assert!((tree.total() - shadow.iter().sum::<f64>()).abs() < 1e-6);
    for (i, v) in shadow.iter().enumerate() {
        assert_eq!(tree.get(i), *v);
    }
}

#[test]
fn replay_root_tracks_priorities_under_mixed_operations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut r = PrioritizedReplay::new(ReplayConfig {
        capacity: 500,
        alpha: 0.6,
        epsilon: 1e-6,
    })
    .unwrap();
    for _ in 0..10_000 {
        if r.is_empty() || rng.gen_bool(0.4) {
            r.push(dummy());
        } else {
            let s = r.sample(8, 0.4, &mut rng);
            let td: Vec<f64> = s.indices.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
            r.update_priorities(&s.indices, &td);
        }
    }
    assert!(r.tree().is_consistent());
    let sum: f64 = (0..r.len()).map(|i| r.priority(i).powf(0.6)).sum();
    assert!((r.tree().total() - sum).abs() < 1e-6);
    assert!((0..r.len()).all(|i| r.priority(i) >= 1e-6));
}

fn check_frequencies(alpha: f64, priorities: &[f64], seed: u64) {
    let r = buffer(alpha, priorities);
    let weights: Vec<f64> = priorities.iter().map(|p| p.powf(alpha)).collect();
    let z: f64 = weights.iter().sum();
    let mut counts = vec![0usize; priorities.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = 100_000;
    for _ in 0..draws / 32 {
        for i in r.sample(32, 0.5, &mut rng).indices {
            counts[i] += 1;
        }
    }
    let n = (draws / 32 * 32) as f64;
    for (c, w) in counts.iter().zip(&weights) {
        let p = w / z;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!(
            (*c as f64 - n * p).abs() <= 3.0 * sigma,
            "alpha {alpha}: count {c} vs expected {} (σ {sigma})",
            n * p
        );
    }
}

#[test]
fn sampling_frequencies_follow_priorities() {
    check_frequencies(1.0, &[1.0, 3.0], 10);
    check_frequencies(0.6, &[0.5, 1.0, 2.0, 4.0, 8.0], 11);
    check_frequencies(0.0, &[1.0, 5.0, 10.0], 12);
}

#[test]
fn importance_weights_are_normalized() {
    let r = buffer(1.0, &[1.0, 3.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let s = r.sample(4, 1.0, &mut rng);
        let max = s.weights.iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        for (&i, &w) in s.indices.iter().zip(&s.weights) {
            // (N·P)^−1 relative to the least likely item in the batch
            let expected = if i == 0 || !s.indices.contains(&0) { 1.0 } else { 1.0 / 3.0 };
            assert!((w - expected).abs() < 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn sum_tree_invariant_holds_for_any_sequence(ops in prop::collection::vec((0usize..37, 0.0f64..100.0), 1..300)) {
        let mut t = SumTree::new(37);
        for (i, v) in ops {
            t.set(i, v);
            prop_assert!(t.is_consistent());
        }
    }
}
