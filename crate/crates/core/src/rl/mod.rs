//! DDPG and TD3 learners with a uniform replay buffer.

mod agent;
mod buffer;
mod io;


use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agent::{bootstrap_targets, Agent, AgentParams, UpdateStats, ACTION_DIM};
pub use buffer::ReplayBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ddpg")]
    Ddpg,
    #[serde(rename = "td3")]
    Td3,
}

impl Algorithm {
    pub fn critic_count(self) -> usize {
        match self {
            Algorithm::Ddpg => 1,
            Algorithm::Td3 => 2,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Algorithm::Ddpg => 0,
            Algorithm::Td3 => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Algorithm::Ddpg),
            1 => Ok(Algorithm::Td3),
            _ => Err(Error::Inconsistent(format!("unknown algorithm tag {tag}"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ddpg => "DDPG",
            Algorithm::Td3 => "TD3",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(Algorithm::Ddpg),
            "td3" => Ok(Algorithm::Td3),
            _ => Err(Error::Config(format!("unknown algorithm {s:?} (expected ddpg or td3)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    pub exploration_noise: f64,
    pub policy_delay: usize,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 64,
            buffer_capacity: 100_000,
            warmup_steps: 1000,
            exploration_noise: 0.1,
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            hidden: 64,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be > 0".into());
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.hidden == 0 {
            return bad("batch size, buffer capacity and hidden width must be >= 1".into());
        }
        if self.policy_delay == 0 {
            return bad("policy_delay must be >= 1".into());
        }
        for (name, v) in [
            ("exploration_noise", self.exploration_noise),
            ("target_noise", self.target_noise),
            ("noise_clip", self.noise_clip),
        ] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}
