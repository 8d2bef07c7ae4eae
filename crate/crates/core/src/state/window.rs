use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::reward::RewardScore;

/// The last `n` rewards of the current episode, oldest first.
///
/// Before `n` rewards have been observed the encoding is zero-padded at the
/// oldest end.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWindowBuffer {
    capacity: usize,
    rewards: VecDeque<f64>,
}

impl RewardWindowBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("reward window needs n >= 1".into()));
        }
        Ok(Self { capacity, rewards: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Rewards observed this episode, capped at the capacity.
    pub fn fill(&self) -> usize {
        self.rewards.len()
    }

    /// Episode reset: back to all zeros.
    pub fn reset(&mut self) {
        self.rewards.clear();
    }

    pub fn push(&mut self, reward: RewardScore) -> Result<()> {
        let r = reward.0;
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("reward {r} outside [0, 1]")));
        }
        if self.rewards.len() == self.capacity {
            self.rewards.pop_front();
        }
        self.rewards.push_back(r);
        Ok(())
    }

    /// Length-`n` state vector, zero-padded at the front.
    pub fn encode(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.capacity - self.rewards.len()];
        out.extend(self.rewards.iter());
        out
    }

    pub fn push_and_encode(&mut self, reward: RewardScore) -> Result<Vec<f64>> {
        self.push(reward)?;
        Ok(self.encode())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn single_push_is_right_aligned() {
        let mut w = RewardWindowBuffer::new(15).unwrap();
        assert_eq!(w.encode(), vec![0.0; 15]);
        let s = w.push_and_encode(RewardScore(0.5)).unwrap();
        let mut expected = vec![0.0; 15];
        expected[14] = 0.5;
        assert_eq!(s, expected);
    }

    #[test]
    fn sixteen_pushes_drop_the_first() {
        let mut w = RewardWindowBuffer::new(15).unwrap();
        let rs: Vec<f64> = (1..=16).map(|i| f64::from(i) / 16.0).collect();
        for &r in &rs {
            w.push(RewardScore(r)).unwrap();
        }
        assert_eq!(w.encode(), rs[1..].to_vec());
    }

    #[test]
    fn four_step_episode_sequence() {
        let mut w = RewardWindowBuffer::new(15).unwrap();
        let seq = [0.0001, 0.0023, 0.3486, 0.9897];
        for r in seq {
            w.push(RewardScore(r)).unwrap();
        }
        assert_eq!(&w.encode()[11..], &seq);
        assert!(w.encode()[..11].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn out_of_range_rewards_are_rejected() {
        let mut w = RewardWindowBuffer::new(3).unwrap();
        assert!(w.push(RewardScore(1.5)).is_err());
        assert!(w.push(RewardScore(-0.1)).is_err());
        assert!(w.push(RewardScore(f64::NAN)).is_err());
        assert!(RewardWindowBuffer::new(0).is_err());
    }

    #[test]
    fn reset_restores_zeros() {
        let mut w = RewardWindowBuffer::new(4).unwrap();
        w.push(RewardScore(0.7)).unwrap();
        w.reset();
        assert_eq!(w.encode(), vec![0.0; 4]);
        assert_eq!(w.fill(), 0);
    }

    proptest! {
        #[test]
        fn window_is_the_zero_padded_suffix(n in 1usize..20, rs in prop::collection::vec(0.0f64..=1.0, 0..40)) {
            let mut w = RewardWindowBuffer::new(n).unwrap();
            for &r in &rs {
                w.push(RewardScore(r)).unwrap();
            }
            let enc = w.encode();
            prop_assert_eq!(enc.len(), n);
            let tail: Vec<f64> = rs.iter().rev().take(n).rev().cloned().collect();
            let pad = n - tail.len();
            prop_assert!(enc[..pad].iter().all(|&x| x == 0.0));
            prop_assert_eq!(&enc[pad..], &tail[..]);
        }
    }
}
