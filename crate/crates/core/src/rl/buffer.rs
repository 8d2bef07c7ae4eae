use rand::Rng as _;

use super::Transition;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Fixed-capacity FIFO of transitions with seeded uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
    rng: Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be >= 1".into()));
        }
        Ok(Self { capacity, items: Vec::new(), cursor: 0, rng: rng::rng_from(seed) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Overwrites the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Indices into `iter()` order are not stable; this returns storage indices.
    pub fn sample_indices(&mut self, batch: usize) -> Result<Vec<usize>> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::Usage(format!("cannot sample {batch} from a buffer holding {}", self.items.len())));
        }
        let n = self.items.len();
        Ok((0..batch).map(|_| self.rng.random_range(0..n)).collect())
    }

    pub fn sample(&mut self, batch: usize) -> Result<Vec<&Transition>> {
        let idx = self.sample_indices(batch)?;
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }

    pub fn get(&self, storage_index: usize) -> Option<&Transition> {
        self.items.get(storage_index)
    }
}
