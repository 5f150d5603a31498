use rand::Rng as _;

use crate::env::Transition;
use crate::rng::Rng;

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    /// Total number of pushes since creation or the last clear.
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            inserted: 0,
        }
    }

    pub fn push(&mut self, tr: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(tr);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = tr;
        }
        self.inserted += 1;
    }

    pub fn extend(&mut self, trs: impl IntoIterator<Item = Transition>) {
        for t in trs {
            self.push(t);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn clear(&mut self) {
        self.items.clear();
        self.inserted = 0;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        assert!(!self.items.is_empty(), "sampling from an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<Transition> {
        self.sample_indices(n, rng)
            .into_iter()
            .map(|i| self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn tr(i: usize) -> Transition {
        Transition {
            s: [i as f64, 0.0, 0.0],
            a: [0.0; 3],
            r: 0.0,
            s_next: [0.0; 3],
            done: false,
            contact_force_z: 0.0,
            success: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(tr(i));
        }
        assert_eq!(b.len(), 3);
        let mut xs: Vec<f64> = (0..3).map(|i| b.get(i).s[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![2.0, 3.0, 4.0]);
        let mut rng = rng_from_seed(0);
        assert!(b.sample(100, &mut rng).iter().all(|t| t.s[0] >= 2.0));
    }
}
