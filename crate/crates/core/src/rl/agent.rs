use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{Algorithm, HyperParams, Transition};
use crate::error::{Error, Result};
use crate::nn::{AdamState, LayerSpec, Network, Tensor};
use crate::rng::{derive_seed, Rng};
use crate::state::StateSpec;

pub const ACTION_DIM: usize = 4;

fn actor_layers(state_dim: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { inputs: state_dim, outputs: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: hidden, outputs: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: hidden, outputs: ACTION_DIM },
        LayerSpec::Tanh,
    ]
}

fn critic_layers(state_dim: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { inputs: state_dim + ACTION_DIM, outputs: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: hidden, outputs: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: hidden, outputs: 1 },
    ]
}

/// All networks of a learner. Immutable snapshots of this are what gets saved
/// and evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub algorithm: Algorithm,
    pub spec: StateSpec,
    pub actor: Network,
    pub critics: Vec<Network>,
    pub actor_target: Network,
    pub critic_targets: Vec<Network>,
}

impl AgentParams {
    pub fn new(algorithm: Algorithm, spec: StateSpec, hidden: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let s = spec.dim();
        let actor = Network::new(&[s], &actor_layers(s, hidden), derive_seed(seed, 0))?;
        let critics = (0..algorithm.critic_count())
            .map(|i| Network::new(&[s + ACTION_DIM], &critic_layers(s, hidden), derive_seed(seed, 1 + i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            algorithm,
            spec,
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.spec.dim()
    }

    /// Checks network counts and that every network accepts the right inputs.
    pub fn validate(&self) -> Result<()> {
        let s = self.state_dim();
        let bad = |m: String| Err(Error::Inconsistent(m));
        if self.critics.len() != self.algorithm.critic_count() || self.critic_targets.len() != self.critics.len() {
            return bad(format!("{} needs {} critics and as many targets", self.algorithm, self.algorithm.critic_count()));
        }
        for net in [&self.actor, &self.actor_target] {
            if net.output_shape(&[s])? != [ACTION_DIM] || net.layers().last().map(|l| l.spec) != Some(LayerSpec::Tanh) {
                return bad(format!("actor must map {s} inputs to {ACTION_DIM} tanh outputs"));
            }
        }
        if self.actor.specs() != self.actor_target.specs() {
            return bad("actor target shape differs from actor".into());
        }
        for (c, t) in self.critics.iter().zip(&self.critic_targets) {
            if c.output_shape(&[s + ACTION_DIM])? != [1] {
                return bad(format!("critic must map {} inputs to 1 output", s + ACTION_DIM));
            }
            if c.specs() != t.specs() {
                return bad("critic target shape differs from critic".into());
            }
        }
        Ok(())
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim() {
            return Err(Error::Dimension { expected: self.state_dim(), got: state.len() });
        }
        Ok(())
    }

    /// Deterministic policy output.
    pub fn act(&self, state: &[f64]) -> Result<[f64; ACTION_DIM]> {
        self.check_state(state)?;
        let out = self.actor.predict(Tensor::new(vec![1, state.len()], state.to_vec())?)?;
        let mut a = [0.0; ACTION_DIM];
        a.copy_from_slice(out.data());
        Ok(a)
    }
}

/// `y_n = r_n` for terminal transitions, otherwise
/// `r_n + gamma * min_i next_q[i][n]`.
pub fn bootstrap_targets(rewards: &[f64], dones: &[bool], next_q: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|n| {
            if dones[n] {
                rewards[n]
            } else {
                let q = next_q.iter().map(|c| c[n]).fold(f64::INFINITY, f64::min);
                rewards[n] + gamma * q
            }
        })
        .collect()
}

/// Bootstrapped regression targets, also broken down per target critic.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetValues {
    pub y: Vec<f64>,
    pub per_critic: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean over critics of each critic's mean squared TD error.
    pub critic_loss: f64,
    /// `-mean Q(s, mu(s))` when the actor was updated.
    pub actor_loss: Option<f64>,
}

/// A learner: parameters, optimizer states and hyperparameters.
#[derive(Debug, Clone)]
pub struct Agent {
    params: AgentParams,
    hp: HyperParams,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    updates: u64,
}

fn stack(rows: impl Iterator<Item = impl AsRef<[f64]>>, width: usize) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        let r = r.as_ref();
        if r.len() != width {
            return Err(Error::Dimension { expected: width, got: r.len() });
        }
        data.extend_from_slice(r);
        n += 1;
    }
    Tensor::new(vec![n, width], data)
}

fn concat_columns(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, wa, wb) = (a.batch(), a.shape()[1], b.shape()[1]);
    let mut data = Vec::with_capacity(n * (wa + wb));
    for i in 0..n {
        data.extend_from_slice(a.row(i));
        data.extend_from_slice(b.row(i));
    }
    Tensor::new(vec![n, wa + wb], data).expect("finite inputs")
}

impl Agent {
    pub fn new(algorithm: Algorithm, spec: StateSpec, hp: HyperParams) -> Result<Self> {
        hp.validate()?;
        let params = AgentParams::new(algorithm, spec, hp.hidden, hp.seed)?;
        Self::from_params(params, hp)
    }

    /// Wraps existing networks with fresh optimizer states.
    pub fn from_params(params: AgentParams, hp: HyperParams) -> Result<Self> {
        hp.validate()?;
        params.validate()?;
        let actor_opt = AdamState::new(&params.actor, hp.actor_lr);
        let critic_opts = params.critics.iter().map(|c| AdamState::new(c, hp.critic_lr)).collect();
        Ok(Self { params, hp, actor_opt, critic_opts, updates: 0 })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.params.algorithm
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut AgentParams {
        &mut self.params
    }

    pub fn into_params(self) -> AgentParams {
        self.params
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn hyper_params_mut(&mut self) -> &mut HyperParams {
        &mut self.hp
    }

    pub fn actor_optimizer(&self) -> &AdamState {
        &self.actor_opt
    }

    pub fn critic_optimizers(&self) -> &[AdamState] {
        &self.critic_opts
    }

    /// Gradient updates performed so far.
    pub fn update_count(&self) -> u64 {
        self.updates
    }

    /// Uniform random during warmup (`env_steps < warmup_steps`) when
    /// exploring, actor output plus clamped Gaussian noise after it, plain
    /// actor output when not exploring.
    pub fn select_action(&self, state: &[f64], explore: bool, env_steps: usize, rng: &mut Rng) -> Result<[f64; ACTION_DIM]> {
        self.params.check_state(state)?;
        if explore && env_steps < self.hp.warmup_steps {
            return Ok(std::array::from_fn(|_| rng.random_range(-1.0..=1.0)));
        }
        let mut a = self.params.act(state)?;
        if explore {
            for v in &mut a {
                let noise: f64 = rng.sample(StandardNormal);
                *v = (*v + self.hp.exploration_noise * noise).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    fn check_batch(&self, batch: &[&Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Usage("update on an empty batch".into()));
        }
        Ok(())
    }

    fn next_states(&self, batch: &[&Transition]) -> Result<Tensor> {
        stack(batch.iter().map(|t| &t.next_state), self.params.state_dim())
    }

    fn targets_with(&self, batch: &[&Transition], next_actions: &Tensor, critics: usize) -> Result<TargetValues> {
        let x = concat_columns(&self.next_states(batch)?, next_actions);
        let next_q = self.params.critic_targets[..critics]
            .iter()
            .map(|c| Ok(c.predict(x.clone())?.into_data()))
            .collect::<Result<Vec<_>>>()?;
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = batch.iter().map(|t| t.done).collect();
        let per_critic = next_q
            .iter()
            .map(|q| bootstrap_targets(&rewards, &dones, std::slice::from_ref(q), self.hp.gamma))
            .collect();
        Ok(TargetValues { y: bootstrap_targets(&rewards, &dones, &next_q, self.hp.gamma), per_critic })
    }

    /// `r + gamma (1 - done) Q1'(s', mu'(s'))`.
    pub fn ddpg_target_values(&self, batch: &[&Transition]) -> Result<TargetValues> {
        self.check_batch(batch)?;
        let a = self.params.actor_target.predict(self.next_states(batch)?)?;
        self.targets_with(batch, &a, 1)
    }

    /// Clipped double-Q target with smoothed target actions.
    pub fn td3_target_values(&self, batch: &[&Transition], rng: &mut Rng) -> Result<TargetValues> {
        self.check_batch(batch)?;
        if self.params.critic_targets.len() < 2 {
            return Err(Error::Usage("TD3 targets need two critics".into()));
        }
        let mut a = self.params.actor_target.predict(self.next_states(batch)?)?;
        let (sigma, c) = (self.hp.target_noise, self.hp.noise_clip);
        for v in a.data_mut() {
            let noise: f64 = rng.sample(StandardNormal);
            *v = (*v + (sigma * noise).clamp(-c, c)).clamp(-1.0, 1.0);
        }
        self.targets_with(batch, &a, 2)
    }

    fn critic_step(&mut self, i: usize, x: &Tensor, y: &[f64]) -> Result<f64> {
        let critic = &mut self.params.critics[i];
        let (q, tape) = critic.forward(x.clone())?;
        let b = y.len() as f64;
        let diff: Vec<f64> = q.data().iter().zip(y).map(|(q, y)| q - y).collect();
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / b;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("critic {i} loss {loss} at update {}", self.updates)));
        }
        let grad = Tensor::new(vec![y.len(), 1], diff.iter().map(|d| 2.0 * d / b).collect())?;
        let bw = critic.backward(&tape, &grad)?;
        self.critic_opts[i].step(critic, &bw.params)?;
        Ok(loss)
    }

    fn actor_step(&mut self, states: Tensor) -> Result<f64> {
        let s = self.params.state_dim();
        let b = states.batch();
        let (a, atape) = self.params.actor.forward(states.clone())?;
        let critic = &self.params.critics[0];
        let (q, ctape) = critic.forward(concat_columns(&states, &a))?;
        let loss = -q.data().iter().sum::<f64>() / b as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("actor loss {loss} at update {}", self.updates)));
        }
        let dq = Tensor::new(vec![b, 1], vec![-1.0 / b as f64; b])?;
        let dx = critic.backward(&ctape, &dq)?.input;
        let mut da = Vec::with_capacity(b * ACTION_DIM);
        for n in 0..b {
            da.extend_from_slice(&dx.row(n)[s..]);
        }
        let abw = self.params.actor.backward(&atape, &Tensor::new(vec![b, ACTION_DIM], da)?)?;
        self.actor_opt.step(&mut self.params.actor, &abw.params)?;
        Ok(loss)
    }

    /// Mixes every target network towards its online network by `tau`.
    pub fn polyak_update(&mut self) -> Result<()> {
        let tau = self.hp.tau;
        let p = &mut self.params;
        p.actor_target.polyak_from(&p.actor, tau)?;
        for (t, c) in p.critic_targets.iter_mut().zip(&p.critics) {
            t.polyak_from(c, tau)?;
        }
        Ok(())
    }

    fn critic_inputs(&self, batch: &[&Transition]) -> Result<(Tensor, Tensor)> {
        let states = stack(batch.iter().map(|t| &t.state), self.params.state_dim())?;
        let actions = stack(batch.iter().map(|t| t.action), ACTION_DIM)?;
        Ok((concat_columns(&states, &actions), states))
    }

    pub fn ddpg_update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        if self.algorithm() != Algorithm::Ddpg {
            return Err(Error::Usage("ddpg_update on a TD3 agent".into()));
        }
        let y = self.ddpg_target_values(batch)?.y;
        let (x, states) = self.critic_inputs(batch)?;
        self.updates += 1;
        let critic_loss = self.critic_step(0, &x, &y)?;
        let actor_loss = self.actor_step(states)?;
        self.polyak_update()?;
        Ok(UpdateStats { critic_loss, actor_loss: Some(actor_loss) })
    }

    /// Actor and targets move only when `update_index % policy_delay == 0`.
    pub fn td3_update(&mut self, batch: &[&Transition], update_index: u64, rng: &mut Rng) -> Result<UpdateStats> {
        if self.algorithm() != Algorithm::Td3 {
            return Err(Error::Usage("td3_update on a DDPG agent".into()));
        }
        let y = self.td3_target_values(batch, rng)?.y;
        let (x, states) = self.critic_inputs(batch)?;
        self.updates += 1;
        let critic_loss = (self.critic_step(0, &x, &y)? + self.critic_step(1, &x, &y)?) / 2.0;
        let actor_loss = if update_index.is_multiple_of(self.hp.policy_delay as u64) {
            let l = self.actor_step(states)?;
            self.polyak_update()?;
            Some(l)
        } else {
            None
        };
        Ok(UpdateStats { critic_loss, actor_loss })
    }

    /// One update of whichever algorithm this agent runs; TD3's delay counter
    /// is the number of updates including this one.
    pub fn update(&mut self, batch: &[&Transition], rng: &mut Rng) -> Result<UpdateStats> {
        match self.algorithm() {
            Algorithm::Ddpg => self.ddpg_update(batch),
            Algorithm::Td3 => {
                let idx = self.updates + 1;
                self.td3_update(batch, idx, rng)
            }
        }
    }
}
