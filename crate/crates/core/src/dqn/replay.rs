use rand::seq::index;
use rand::Rng;

use crate::mdp::Transition;

/// Fixed-capacity FIFO ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, storage: Vec::with_capacity(capacity.min(1 << 16)), cursor: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Stores `t`, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// `batch` distinct entries drawn uniformly. Returns fewer when the
    /// buffer holds fewer.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        let n = batch.min(self.storage.len());
        index::sample(rng, self.storage.len(), n).into_iter().map(|i| &self.storage[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn t(i: usize) -> Transition {
        Transition { state: vec![i as f64], action: 0, reward: i as f64, next_state: vec![], done: false }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..8 {
            b.push(t(i));
            assert!(b.len() <= 5);
        }
        let kept: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn sampling_is_without_replacement_and_uniform() {
        let mut b = ReplayBuffer::new(50);
        for i in 0..50 {
            b.push(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0usize; 50];
        let rounds = 20_000;
        for _ in 0..rounds {
            let batch = b.sample(10, &mut rng);
            let mut seen: Vec<usize> = batch.iter().map(|t| t.reward as usize).collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 10);
            for i in seen {
                counts[i] += 1;
            }
        }
        let expect = rounds as f64 * 10.0 / 50.0;
        for c in counts {
            assert!((c as f64 - expect).abs() / expect < 0.05, "{c} vs {expect}");
        }
    }
}
