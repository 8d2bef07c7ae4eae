use serde::{Deserialize, Serialize};

use super::Pipeline;
use crate::error::Result;
use crate::image::Image;
use crate::rl::{Transition, ACTION_DIM};
use crate::sim::{self, render, Action, WorldState};
use crate::state::RewardWindowBuffer;

/// One line of the per-episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub episode: usize,
    pub length: usize,
    pub cumulative_reward: f64,
    pub success: bool,
    /// Classifier score after each action, in order.
    pub rewards: Vec<f64>,
}

/// An episode in progress: world state, reward window and the current
/// encoded state vector.
pub struct Episode<'p> {
    pipeline: &'p Pipeline,
    world: WorldState,
    window: RewardWindowBuffer,
    state: Vec<f64>,
    initial_reward: f64,
    rewards: Vec<f64>,
}

impl<'p> Episode<'p> {
    /// Resets the world, scores the first frame and encodes the first state.
    pub fn begin(pipeline: &'p Pipeline, episode_seed: u64) -> Result<Self> {
        let world = sim::reset(&pipeline.env, episode_seed)?;
        let window = RewardWindowBuffer::new(match pipeline.encoder.spec() {
            crate::state::StateSpec::RewardWindow { n, .. } => n,
            _ => 1,
        })?;
        let mut ep = Self { pipeline, world, window, state: Vec::new(), initial_reward: 0.0, rewards: Vec::new() };
        let (reward, state) = ep.observe()?;
        ep.initial_reward = reward;
        ep.state = state;
        Ok(ep)
    }

    /// Render, score, push into the window, encode.
    fn observe(&mut self) -> Result<(f64, Vec<f64>)> {
        let p = self.pipeline;
        let reward_image = render(&self.world, &p.reward_env);
        let reward = p.classifier.predict_success(&reward_image)?;
        self.window.push(reward)?;
        let state = if p.encoder.uses_window() {
            self.window.encode()
        } else if p.state_env.resolution() == p.reward_env.resolution() {
            p.encoder.encode(&reward_image, &self.window)?
        } else {
            p.encoder.encode(&render(&self.world, &p.state_env), &self.window)?
        };
        Ok((reward.0, state))
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn is_done(&self) -> bool {
        sim::is_done(&self.world, &self.pipeline.env)
    }

    pub fn is_success(&self) -> bool {
        sim::is_success(&self.world, &self.pipeline.env)
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Score of the reset frame; not part of the cumulative reward.
    pub fn initial_reward(&self) -> f64 {
        self.initial_reward
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Rendering at the reward resolution of the current world state.
    pub fn frame(&self) -> Image {
        render(&self.world, &self.pipeline.reward_env)
    }

    /// Applies one action. `done` on the transition marks success or timeout.
    pub fn step(&mut self, action: [f64; ACTION_DIM]) -> Result<Transition> {
        let action = Action::new(action);
        self.world = sim::advance(&self.world, &action, &self.pipeline.env)?;
        let (reward, next_state) = self.observe()?;
        self.rewards.push(reward);
        let prev = std::mem::replace(&mut self.state, next_state);
        Ok(Transition {
            state: prev,
            action: action.0,
            reward,
            next_state: self.state.clone(),
            done: self.is_done(),
        })
    }

    pub fn log(&self, seed: u64, episode: usize) -> EpisodeLog {
        EpisodeLog {
            seed,
            episode,
            length: self.rewards.len(),
            cumulative_reward: self.rewards.iter().sum(),
            success: self.is_success(),
            rewards: self.rewards.clone(),
        }
    }
}

/// Result of [`run_episode`].
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub transitions: Vec<Transition>,
    pub success: bool,
    pub cumulative_reward: f64,
    pub initial_reward: f64,
    pub final_frame: Image,
}

/// Runs one full episode, asking `policy` for an action at every step.
pub fn run_episode<F>(pipeline: &Pipeline, episode_seed: u64, mut policy: F) -> Result<EpisodeOutcome>
where
    F: FnMut(&[f64], &WorldState) -> Result<[f64; ACTION_DIM]>,
{
    let mut ep = Episode::begin(pipeline, episode_seed)?;
    let mut transitions = Vec::new();
    while !ep.is_done() {
        let a = policy(ep.state(), ep.world())?;
        transitions.push(ep.step(a)?);
    }
    Ok(EpisodeOutcome {
        success: ep.is_success(),
        cumulative_reward: ep.rewards().iter().sum(),
        initial_reward: ep.initial_reward(),
        final_frame: ep.frame(),
        transitions,
    })
}
