//! End-to-end experiments: train and evaluate policies for every
//! (state representation, algorithm, seed) cell and report the results.

mod compare;
mod config;
mod episode;

#[cfg(test)]
mod tests;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::SuccessPredictor;
use crate::rl::{Agent, AgentParams, Algorithm, HyperParams, ReplayBuffer, Transition, ACTION_DIM};
use crate::rng::{self, derive_seed};
use crate::sim::{EnvConfig, WorldState};
use crate::state::{PcaBasis, StateEncoder, StateSpec};

pub use compare::{best_success, compare_representations, format_table, write_csv, write_outputs, CellResult, CompareOptions, CSV_HEADER};
pub use config::ExperimentConfig;
pub use episode::{run_episode, Episode, EpisodeLog, EpisodeOutcome};

const TRAIN_EPISODES: u64 = 0x0074_7261_696e;
const EVAL_EPISODES: u64 = 0x6576_616c;

/// The fixed parts every rollout shares: environment, reward model and state
/// encoder.
#[derive(Clone)]
pub struct Pipeline {
    pub env: EnvConfig,
    /// `env` at the classifier's input resolution.
    pub reward_env: EnvConfig,
    /// `env` at the resolution the state is computed from.
    pub state_env: EnvConfig,
    pub classifier: Arc<dyn SuccessPredictor + Send + Sync>,
    pub encoder: StateEncoder,
}

impl Pipeline {
    pub fn new(
        env: EnvConfig,
        classifier: Arc<dyn SuccessPredictor + Send + Sync>,
        spec: StateSpec,
        basis: Option<Arc<PcaBasis>>,
    ) -> Result<Self> {
        env.validate()?;
        let (rw, rh) = classifier.resolution();
        let (sw, sh) = spec.source_resolution();
        Ok(Self {
            reward_env: env.clone().with_resolution(rw, rh),
            state_env: env.clone().with_resolution(sw, sh),
            env,
            classifier,
            encoder: StateEncoder::new(spec, basis)?,
        })
    }

    pub fn spec(&self) -> StateSpec {
        self.encoder.spec()
    }

    /// Same environment and classifier, another state representation.
    pub fn with_spec(&self, spec: StateSpec, basis: Option<Arc<PcaBasis>>) -> Result<Self> {
        Self::new(self.env.clone(), self.classifier.clone(), spec, basis)
    }
}

pub fn train_episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(derive_seed(seed, TRAIN_EPISODES), episode as u64)
}

pub fn eval_episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(derive_seed(seed, EVAL_EPISODES), episode as u64)
}

/// What [`train_policy`] returns.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: AgentParams,
    /// Completed training episodes only; a final episode cut off by the step
    /// budget is left out.
    pub curve: Vec<EpisodeLog>,
    pub env_steps: usize,
    pub updates: u64,
    /// Steps spent in the cut-off final episode, if any.
    pub truncated_steps: usize,
}

/// Trains for exactly `train_steps` environment steps with one gradient
/// update per step once warmup is over and a batch is available.
pub fn train_policy(
    pipeline: &Pipeline,
    algorithm: Algorithm,
    hp: &HyperParams,
    train_steps: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    if train_steps == 0 {
        return Err(Error::Config("train_steps must be >= 1".into()));
    }
    let hp = HyperParams { seed: derive_seed(seed, 1), ..hp.clone() };
    let mut agent = Agent::new(algorithm, pipeline.spec(), hp.clone())?;
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity, derive_seed(seed, 2))?;
    let mut act_rng = rng::stream(seed, 3);
    let mut update_rng = rng::stream(seed, 4);
    let mut curve = Vec::new();
    let mut env_steps = 0;
    let mut episode = 0;
    let mut truncated_steps = 0;
    while env_steps < train_steps {
        let mut ep = Episode::begin(pipeline, train_episode_seed(seed, episode))?;
        while !ep.is_done() && env_steps < train_steps {
            let a = agent.select_action(ep.state(), true, env_steps, &mut act_rng)?;
            buffer.push(ep.step(a)?);
            env_steps += 1;
            if env_steps >= hp.warmup_steps && buffer.len() >= hp.batch_size {
                let idx = buffer.sample_indices(hp.batch_size)?;
                let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i).expect("sampled index")).collect();
                agent.update(&batch, &mut update_rng).map_err(|e| match e {
                    Error::NonFinite(m) => {
                        Error::NonFinite(format!("{m} (seed {seed}, env step {env_steps}, episode {episode})"))
                    }
                    e => e,
                })?;
            }
        }
        if ep.is_done() {
            curve.push(ep.log(seed, episode));
        } else {
            truncated_steps = ep.len();
        }
        episode += 1;
    }
    let updates = agent.update_count();
    Ok(TrainOutcome { params: agent.into_params(), curve, env_steps, updates, truncated_steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean per-episode cumulative classifier reward.
    pub avg_reward: f64,
    /// Percentage of completed episodes that ended in ground-truth success.
    pub task_success_pct: f64,
    pub episodes: usize,
    pub env_steps: usize,
    pub logs: Vec<EpisodeLog>,
}

impl EvalMetrics {
    pub fn from_logs(logs: Vec<EpisodeLog>, env_steps: usize) -> Result<Self> {
        if logs.is_empty() {
            return Err(Error::Config("no evaluation episode completed within the step budget".into()));
        }
        let n = logs.len() as f64;
        let avg_reward = logs.iter().map(|l| l.cumulative_reward).sum::<f64>() / n;
        let successes = logs.iter().filter(|l| l.success).count();
        Ok(Self {
            avg_reward,
            task_success_pct: 100.0 * successes as f64 / n,
            episodes: logs.len(),
            env_steps,
            logs,
        })
    }

    /// Recomputes the aggregates from the logs and demands bit equality.
    pub fn verify(&self) -> Result<()> {
        let again = Self::from_logs(self.logs.clone(), self.env_steps)?;
        let same = again.avg_reward.to_bits() == self.avg_reward.to_bits()
            && again.task_success_pct.to_bits() == self.task_success_pct.to_bits()
            && again.episodes == self.episodes;
        if !same {
            return Err(Error::Inconsistent("metrics do not match their episode logs".into()));
        }
        Ok(())
    }
}

/// Runs `policy` greedily until `eval_steps` environment steps are used.
/// A final episode cut off by the budget is dropped from the statistics.
pub fn evaluate_with<F>(pipeline: &Pipeline, eval_steps: usize, seed: u64, mut policy: F) -> Result<EvalMetrics>
where
    F: FnMut(&[f64], &WorldState) -> Result<[f64; ACTION_DIM]>,
{
    let mut logs = Vec::new();
    let mut steps = 0;
    let mut episode = 0;
    while steps < eval_steps {
        let mut ep = Episode::begin(pipeline, eval_episode_seed(seed, episode))?;
        while !ep.is_done() && steps < eval_steps {
            let a = policy(ep.state(), ep.world())?;
            ep.step(a)?;
            steps += 1;
        }
        if ep.is_done() {
            logs.push(ep.log(seed, episode));
        }
        episode += 1;
    }
    let metrics = EvalMetrics::from_logs(logs, steps)?;
    metrics.verify()?;
    Ok(metrics)
}

/// Deterministic-policy evaluation of a trained agent.
pub fn evaluate_policy(pipeline: &Pipeline, params: &AgentParams, eval_steps: usize, seed: u64) -> Result<EvalMetrics> {
    if params.spec != pipeline.spec() {
        return Err(Error::Config(format!("policy expects {} but the pipeline encodes {}", params.spec, pipeline.spec())));
    }
    evaluate_with(pipeline, eval_steps, seed, |s, _| params.act(s))
}

/// Uniform random actions, for the chance-rate baseline.
pub fn evaluate_random(pipeline: &Pipeline, eval_steps: usize, seed: u64) -> Result<EvalMetrics> {
    use rand::Rng as _;
    let mut r = rng::stream(seed, 5);
    evaluate_with(pipeline, eval_steps, seed, |_, _| Ok(std::array::from_fn(|_| r.random_range(-1.0..=1.0))))
}
