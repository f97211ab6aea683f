//! Prioritized experience replay over 8-bit quantized states.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::codec::{Reader, Writer};
use crate::error::{AgentError, Result};
use crate::sumtree::SumTree;

/// Observation stored at 8 bits per value; observations live in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredState(Vec<u8>);

impl StoredState {
    pub fn quantize(values: &[f32]) -> Self {
        StoredState(
            values
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn write_to(&self, out: &mut [f32]) {
        for (o, &b) in out.iter_mut().zip(&self.0) {
            *o = b as f32 / 255.0;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub state: Arc<StoredState>,
    pub action: usize,
    pub reward: f64,
    /// Usually shared with the following transition's `state`.
    pub next_state: Arc<StoredState>,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            capacity: 250_000,
            alpha: 0.6,
            epsilon: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub indices: Vec<usize>,
    /// Importance weights normalized so the largest in the batch is 1.
    pub weights: Vec<f64>,
}

/// Ring buffer with a sum tree over `p^α`.
#[derive(Clone, Debug)]
pub struct PrioritizedReplay {
    config: ReplayConfig,
    items: Vec<Transition>,
    next: usize,
    tree: SumTree,
    max_priority: f64,
}

impl PrioritizedReplay {
    pub fn new(config: ReplayConfig) -> Result<Self> {
        if config.capacity == 0 {
            return Err(AgentError::Config("replay capacity must be positive".into()));
        }
        if !(config.alpha >= 0.0 && config.epsilon > 0.0) {
            return Err(AgentError::Config("replay needs alpha >= 0 and epsilon > 0".into()));
        }
        Ok(PrioritizedReplay {
            config,
            items: Vec::new(),
            next: 0,
            tree: SumTree::new(config.capacity),
            max_priority: 1.0,
        })
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// The most recently pushed transition.
    pub fn last(&self) -> Option<&Transition> {
        if self.items.is_empty() {
            return None;
        }
        let cap = self.config.capacity;
        self.items.get((self.next + cap - 1) % cap)
    }

    /// Raw priority `p_i` (before the exponent).
    pub fn priority(&self, index: usize) -> f64 {
        let leaf = self.tree.get(index);
        if self.config.alpha == 0.0 {
            // p^0 loses the priority; report the tracked maximum instead
            return self.max_priority;
        }
        leaf.powf(1.0 / self.config.alpha)
    }

    /// Inserts with the current maximum priority, evicting the oldest item
    /// once full.
    pub fn push(&mut self, t: Transition) {
        let slot = self.next;
        if self.items.len() < self.config.capacity {
            self.items.push(t);
        } else {
            self.items[slot] = t;
        }
        self.tree.set(slot, self.max_priority.powf(self.config.alpha));
        self.next = (slot + 1) % self.config.capacity;
    }

    /// Stratified proportional sampling with importance weights
    /// `(N·P(i))^−β`.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Sample {
        assert!(!self.is_empty(), "sampling from an empty replay buffer");
        let total = self.tree.total();
        let segment = total / batch as f64;
        let n = self.len() as f64;
        let mut indices = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        for i in 0..batch {
            let mass = (i as f64 + rng.gen::<f64>()) * segment;
            let idx = self.tree.find(mass).min(self.len() - 1);
            let p = self.tree.get(idx) / total;
            indices.push(idx);
            weights.push((n * p).powf(-beta));
        }
        let max = weights.iter().cloned().fold(f64::MIN, f64::max);
        for w in &mut weights {
            *w /= max;
        }
        Sample { indices, weights }
    }

    /// Sets `p_i = |δ_i| + ε` for the sampled items.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) {
        for (&i, &td) in indices.iter().zip(td_errors) {
            let p = td.abs() + self.config.epsilon;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.config.alpha));
        }
    }

    /// Serializes transitions (sharing identical states once), ring position,
    /// priorities and the running maximum.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        let mut ids: HashMap<*const StoredState, u64> = HashMap::new();
        let mut states: Vec<&StoredState> = Vec::new();
        let mut refs = Vec::with_capacity(self.items.len() * 2);
        for t in &self.items {
            for s in [&t.state, &t.next_state] {
                let id = *ids.entry(Arc::as_ptr(s)).or_insert_with(|| {
                    states.push(s);
                    states.len() as u64 - 1
                });
                refs.push(id);
            }
        }
        w.u64(states.len() as u64);
        for s in &states {
            w.bytes(&s.0);
        }
        w.u64(self.items.len() as u64);
        for (k, t) in self.items.iter().enumerate() {
            w.u64(refs[2 * k]);
            w.u64(refs[2 * k + 1]);
            w.u64(t.action as u64);
            w.f64(t.reward);
            w.u8(t.done as u8);
            w.f64(self.tree.get(k));
        }
        w.u64(self.next as u64);
        w.f64(self.max_priority);
        w.finish()
    }

    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader::new(bytes);
        let n_states = r.u64()? as usize;
        let mut states = Vec::with_capacity(n_states.min(1 << 20));
        for _ in 0..n_states {
            states.push(Arc::new(StoredState(r.bytes()?.to_vec())));
        }
        let n = r.u64()? as usize;
        if n > self.config.capacity {
            return Err(AgentError::Format("replay holds more items than its capacity".into()));
        }
        let mut tree = SumTree::new(self.config.capacity);
        let mut items = Vec::with_capacity(n);
        let state = |id: u64| -> Result<Arc<StoredState>> {
            states
                .get(id as usize)
                .cloned()
                .ok_or_else(|| AgentError::Format("replay state id out of range".into()))
        };
        for k in 0..n {
            let s = state(r.u64()?)?;
            let ns = state(r.u64()?)?;
            let action = r.u64()? as usize;
            let reward = r.f64()?;
            let done = r.u8()? != 0;
            tree.set(k, r.f64()?);
            items.push(Transition {
                state: s,
                action,
                reward,
                next_state: ns,
                done,
            });
        }
        let next = r.u64()? as usize;
        let max_priority = r.f64()?;
        r.finish()?;
        self.items = items;
        self.tree = tree;
        self.next = next % self.config.capacity;
        self.max_priority = max_priority;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(v: f32) -> Transition {
        let s = Arc::new(StoredState::quantize(&[v]));
        Transition {
            state: s.clone(),
            action: 0,
            reward: 0.0,
            next_state: s,
            done: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut r = PrioritizedReplay::new(ReplayConfig {
            capacity: 3,
            ..Default::default()
        })
        .unwrap();
        for i in 0..5 {
            r.push(transition(i as f32 / 10.0));
        }
        assert_eq!(r.len(), 3);
        // slots 0 and 1 were overwritten by items 3 and 4
        assert_eq!(r.get(0).state.0[0], (0.3f32 * 255.0).round() as u8);
        assert_eq!(r.get(2).state.0[0], (0.2f32 * 255.0).round() as u8);
    }

    #[test]
    fn priority_floor_and_max_insertion() {
        let mut r = PrioritizedReplay::new(ReplayConfig {
            capacity: 4,
            alpha: 1.0,
            epsilon: 1e-6,
        })
        .unwrap();
        r.push(transition(0.0));
        r.push(transition(0.0));
        r.update_priorities(&[0, 1], &[0.0, 2.5]);
        assert_eq!(r.priority(0), 1e-6);
        r.push(transition(0.0));
        assert_eq!(r.priority(2), 2.5 + 1e-6);
        let sum: f64 = (0..3).map(|i| r.tree().get(i)).sum();
        assert!((r.tree().total() - sum).abs() < 1e-12);
    }

    #[test]
    fn two_item_probabilities() {
        let mut r = PrioritizedReplay::new(ReplayConfig {
            capacity: 2,
            alpha: 1.0,
            epsilon: 1e-12,
        })
        .unwrap();
        r.push(transition(0.0));
        r.push(transition(0.0));
        r.update_priorities(&[0, 1], &[1.0, 3.0]);
        let p0 = r.tree().get(0) / r.tree().total();
        assert!((p0 - 0.25).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = r.sample(2, 1.0, &mut rng);
        // one draw per stratum: [0, 2) lands on item 0 half the time, [2, 4) on item 1
        assert_eq!(s.indices[1], 1);
        assert!(s.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
    }

    #[test]
    fn bytes_round_trip_shares_states() {
        let mut r = PrioritizedReplay::new(ReplayConfig {
            capacity: 8,
            ..Default::default()
        })
        .unwrap();
        let mut prev = Arc::new(StoredState::quantize(&[0.0, 0.5]));
        for i in 0..10 {
            let next = Arc::new(StoredState::quantize(&[i as f32 / 10.0, 0.5]));
            r.push(Transition {
                state: prev.clone(),
                action: i % 3,
                reward: i as f64,
                next_state: next.clone(),
                done: i % 4 == 0,
            });
            prev = next;
        }
        r.update_priorities(&[1, 5], &[0.3, 2.0]);
        let bytes = r.to_bytes();
        let mut back = PrioritizedReplay::new(*r.config()).unwrap();
        back.load_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert!(Arc::ptr_eq(&back.get(2).next_state, &back.get(3).state));
        assert!(back.tree().is_consistent());
    }
}
