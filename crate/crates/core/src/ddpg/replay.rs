use rand::seq::index;

use crate::rng::SimRng;

/// One MDP experience tuple `(s, a, r, s')`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Fixed-capacity ring buffer; once full the oldest entry is overwritten.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(4096)),
            capacity,
            cursor: 0,
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Entries from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Uniform sample of `n` distinct slots.
    pub fn sample_indices(&self, n: usize, rng: &mut SimRng) -> Vec<usize> {
        index::sample(rng, self.items.len(), n.min(self.items.len())).into_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn t(r: f64) -> Transition {
        Transition {
            state: vec![r],
            action: vec![0.0],
            reward: r,
            next_state: vec![r + 1.0],
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(2);
        for r in [1.0, 2.0, 3.0] {
            b.push(t(r));
        }
        let kept: Vec<f64> = b.iter_oldest_first().map(|x| x.reward).collect();
        assert_eq!(kept, vec![2.0, 3.0]);
    }

    #[test]
    fn size_tracks_pushes_below_capacity() {
        let mut b = ReplayBuffer::new(10);
        for k in 0..7 {
            assert_eq!(b.len(), k);
            b.push(t(k as f64));
        }
        assert_eq!(b.len(), 7);
    }

    #[test]
    fn stored_bits_survive() {
        let mut b = ReplayBuffer::new(4);
        let x = Transition {
            state: vec![0.1 + 0.2, -0.0],
            action: vec![f64::MIN_POSITIVE],
            reward: -1e-300,
            next_state: vec![std::f64::consts::PI],
        };
        b.push(x.clone());
        let got = b.get(0).unwrap();
        assert_eq!(got.state[0].to_bits(), x.state[0].to_bits());
        assert_eq!(got.state[1].to_bits(), x.state[1].to_bits());
        assert_eq!(got, &x);
    }

    #[test]
    fn seeded_sampling_reproducible() {
        let mut b = ReplayBuffer::new(100);
        for k in 0..100 {
            b.push(t(k as f64));
        }
        let a = b.sample_indices(16, &mut rng_from(3, &[]));
        let c = b.sample_indices(16, &mut rng_from(3, &[]));
        assert_eq!(a, c);
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 16);
    }
}
