//! Experience replay.

use rand::rngs::StdRng;
use rand::Rng;

use tpa_env::Observation;

use crate::error::{MarlError, Result};

/// One environment transition under the shared reward.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub obs: Vec<Observation>,
    /// Applied (clipped) joint action.
    pub actions: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_obs: Vec<Observation>,
    /// Time-limit cut marker; targets still bootstrap through it.
    pub done: bool,
    /// Power flow failed on this step; its target is the bare reward.
    pub diverged: bool,
}

/// Fixed-capacity FIFO ring with uniform without-replacement sampling.
#[derive(Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0);
        ReplayBuffer { items: Vec::with_capacity(capacity), capacity, head: 0 }
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
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// `k` distinct indices drawn uniformly (Floyd's algorithm).
    pub fn sample_indices(&self, rng: &mut StdRng, k: usize) -> Result<Vec<usize>> {
        let n = self.items.len();
        if k > n {
            return Err(MarlError::Sampling { batch: k, fill: n });
        }
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        for j in (n - k)..n {
            let t = rng.gen_range(0..=j);
            if chosen.contains(&t) {
                chosen.push(j);
            } else {
                chosen.push(t);
            }
        }
        Ok(chosen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn t(tag: f64) -> Transition {
        Transition {
            state: vec![tag],
            obs: vec![],
            actions: vec![],
            reward: tag,
            next_state: vec![],
            next_obs: vec![],
            done: false,
            diverged: false,
        }
    }

    #[test]
    fn fifo_eviction_drops_oldest() {
        let mut buf = ReplayBuffer::new(5);
        for k in 0..8 {
            buf.push(t(k as f64));
        }
        assert_eq!(buf.len(), 5);
        let mut rewards: Vec<f64> = (0..5).map(|i| buf.get(i).reward).collect();
        rewards.sort_by(f64::total_cmp);
        // after 8 pushes at capacity 5, the 3 oldest (0, 1, 2) are gone
        assert_eq!(rewards, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn sampling_is_without_replacement() {
        let mut buf = ReplayBuffer::new(100);
        for k in 0..50 {
            buf.push(t(k as f64));
        }
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..200 {
            let idx = buf.sample_indices(&mut rng, 32).unwrap();
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 32, "indices must be distinct");
            assert!(sorted.iter().all(|&i| i < 50));
        }
    }

    #[test]
    fn oversampling_is_an_error() {
        let mut buf = ReplayBuffer::new(10);
        buf.push(t(0.0));
        let mut rng = StdRng::seed_from_u64(1);
        assert!(matches!(
            buf.sample_indices(&mut rng, 2),
            Err(MarlError::Sampling { batch: 2, fill: 1 })
        ));
    }
}
