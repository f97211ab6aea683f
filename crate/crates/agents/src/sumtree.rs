/// Binary sum tree over a fixed number of leaves. Internal nodes are always
/// recomputed as `left + right`, so they equal the sum of their children
/// exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct SumTree {
    leaves: usize,
    /// Heap layout, root at 1; leaves start at `leaves`.
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.nodes[self.leaves + index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        debug_assert!(value >= 0.0 && value.is_finite());
        let mut i = self.leaves + index;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative range contains `mass`; never returns a
    /// zero-weight leaf while the total is positive.
    pub fn find(&self, mass: f64) -> usize {
        let mut u = mass.max(0.0);
        let mut i = 1;
        while i < self.leaves {
            let (l, r) = (2 * i, 2 * i + 1);
            if u < self.nodes[l] || self.nodes[r] <= 0.0 {
                i = l;
            } else {
                u -= self.nodes[l];
                i = r;
            }
        }
        i - self.leaves
    }

    /// Checks every internal node against its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.leaves).all(|i| self.nodes[i] == self.nodes[2 * i] + self.nodes[2 * i + 1])
    }
}
