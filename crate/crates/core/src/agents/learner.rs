//! Actor-critic machinery shared by PDQN and DDPG.
//!
//! The actor maps a state to a unit-box continuous action through a sigmoid
//! output layer. The critic sees `state ⊕ action` and emits one value per
//! discrete head: `2^N` heads for PDQN, a single head for DDPG.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::checkpoint::{Decoder, Encoder};
use super::net::{column_block, concat_rows, greedy_index, TwinNet};
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::nn::{Activation, MlpSpec, OptimizerConfig};

/// Hyperparameters shared by the learning agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Discount `κ`.
    pub discount: f64,
    /// Soft-update rate `ζ`.
    pub soft_update: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Gaussian exploration noise on the unit-box action, linearly decayed.
    pub noise_start: f64,
    pub noise_end: f64,
    /// Fraction of all episodes over which noise and epsilon decay.
    pub decay_fraction: f64,
    /// Probability of a uniformly random discrete head (PDQN only).
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Learn only once the buffer is full instead of once it holds a batch.
    pub learn_when_full: bool,
    pub updates_per_step: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            hidden_activation: Activation::Relu,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.95,
            soft_update: 0.01,
            buffer_capacity: 10_000,
            batch_size: 64,
            noise_start: 0.2,
            noise_end: 0.02,
            decay_fraction: 0.5,
            epsilon_start: 0.0,
            epsilon_end: 0.0,
            learn_when_full: false,
            updates_per_step: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("agent: {m}")));
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0, 1)", self.discount));
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return bad(format!("soft update {} outside (0, 1]", self.soft_update));
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad("need 0 < batch_size <= buffer_capacity".into());
        }
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative"));
            }
        }
        for (name, v) in [
            ("noise_start", self.noise_start),
            ("noise_end", self.noise_end),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative"));
            }
        }
        if self.epsilon_start > 1.0 || self.epsilon_end > 1.0 {
            return bad("epsilon must not exceed 1".into());
        }
        if !(self.decay_fraction > 0.0 && self.decay_fraction <= 1.0) {
            return bad("decay_fraction outside (0, 1]".into());
        }
        Ok(())
    }

    fn schedule(&self, start: f64, end: f64, episode: usize, total: usize) -> f64 {
        let horizon = (self.decay_fraction * total as f64).max(1.0);
        let frac = (episode as f64 / horizon).min(1.0);
        start + (end - start) * frac
    }

    pub fn noise_at(&self, episode: usize, total: usize) -> f64 {
        self.schedule(self.noise_start, self.noise_end, episode, total)
    }

    pub fn epsilon_at(&self, episode: usize, total: usize) -> f64 {
        self.schedule(self.epsilon_start, self.epsilon_end, episode, total)
    }

    fn actor_opt(&self) -> OptimizerConfig {
        OptimizerConfig::adam(self.actor_lr)
    }

    fn critic_opt(&self) -> OptimizerConfig {
        OptimizerConfig::adam(self.critic_lr)
    }
}

/// Diagnostics of one learning step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean squared TD error before the critic step.
    pub td_loss: f64,
    /// Mean critic value of the actor's action before the actor step.
    pub actor_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ActorCritic {
    pub cfg: AgentConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub heads: usize,
    pub actor: TwinNet,
    pub critic: TwinNet,
    pub buffer: ReplayBuffer,
    pub noise_rng: ChaCha8Rng,
    pub replay_rng: ChaCha8Rng,
    pub noise_scale: f64,
    pub epsilon: f64,
}

impl ActorCritic {
    pub fn new(
        cfg: AgentConfig,
        state_dim: usize,
        action_dim: usize,
        heads: usize,
        seeds: LearnerSeeds,
    ) -> Result<Self> {
        cfg.validate()?;
        let layers = |input: usize, output: usize| {
            let mut v = vec![input];
            v.extend_from_slice(&cfg.hidden);
            v.push(output);
            v
        };
        let actor_spec = MlpSpec::new(layers(state_dim, action_dim), cfg.hidden_activation, Activation::Sigmoid)?;
        let critic_spec = MlpSpec::new(
            layers(state_dim + action_dim, heads),
            cfg.hidden_activation,
            Activation::Identity,
        )?;
        let mut init = ChaCha8Rng::seed_from_u64(seeds.init);
        let actor = TwinNet::new(actor_spec, &cfg.actor_opt(), &mut init);
        let critic = TwinNet::new(critic_spec, &cfg.critic_opt(), &mut init);
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            noise_rng: ChaCha8Rng::seed_from_u64(seeds.noise),
            replay_rng: ChaCha8Rng::seed_from_u64(seeds.replay),
            noise_scale: cfg.noise_start,
            epsilon: cfg.epsilon_start,
            cfg,
            state_dim,
            action_dim,
            heads,
            actor,
            critic,
        })
    }

    pub fn begin_episode(&mut self, episode: usize, total: usize) {
        self.noise_scale = self.cfg.noise_at(episode, total);
        self.epsilon = self.cfg.epsilon_at(episode, total);
    }

    fn head_of(&self, t: &Transition) -> usize {
        if self.heads == 1 {
            0
        } else {
            t.disc_action
        }
    }

    pub fn actor_output(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor.forward(state, 1)?.output().to_vec())
    }

    pub fn q_values(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let input = concat_rows(state, self.state_dim, action, self.action_dim);
        Ok(self.critic.forward(&input, 1)?.output().to_vec())
    }

    /// Actor output plus clipped Gaussian noise when exploring.
    pub fn continuous_action(&mut self, state: &[f64], explore: bool) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::dims("agent state", self.state_dim, state.len()));
        }
        let mut a = self.actor_output(state)?;
        if explore && self.noise_scale > 0.0 {
            let normal = Normal::new(0.0, self.noise_scale).expect("finite nonnegative scale");
            for x in a.iter_mut() {
                *x += normal.sample(&mut self.noise_rng);
            }
        }
        for x in a.iter_mut() {
            *x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        }
        Ok(a)
    }

    /// Greedy head, or a uniform one with probability epsilon when exploring.
    pub fn discrete_action(&mut self, state: &[f64], action: &[f64], explore: bool) -> Result<usize> {
        if explore && self.epsilon > 0.0 && self.noise_rng.random::<f64>() < self.epsilon {
            return Ok(self.noise_rng.random_range(0..self.heads));
        }
        Ok(greedy_index(&self.q_values(state, action)?))
    }

    fn gate_open(&self) -> bool {
        if self.cfg.learn_when_full {
            self.buffer.is_full()
        } else {
            self.buffer.len() >= self.cfg.batch_size
        }
    }

    pub fn update(&mut self) -> Result<Option<UpdateStats>> {
        let mut last = None;
        for _ in 0..self.cfg.updates_per_step {
            if !self.gate_open() {
                return Ok(last);
            }
            let batch: Vec<Transition> = self
                .buffer
                .sample(&mut self.replay_rng, self.cfg.batch_size)
                .expect("gate guarantees a full batch")
                .into_iter()
                .cloned()
                .collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            let td_loss = self.critic_step(&refs)?;
            let actor_value = self.actor_step(&refs)?;
            self.soft_update_targets()?;
            last = Some(UpdateStats { td_loss, actor_value });
        }
        Ok(last)
    }

    fn stack<'t>(&self, batch: &[&'t Transition], pick: impl Fn(&'t Transition) -> &'t [f64], width: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(batch.len() * width);
        for t in batch {
            let row = pick(t);
            if row.len() != width {
                return Err(Error::dims("transition field", width, row.len()));
            }
            out.extend_from_slice(row);
        }
        Ok(out)
    }

    /// `r + κ·max_k Q̃(s', ν̃(s'))_k`, or `r` at terminal transitions.
    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let m = batch.len();
        let next = self.stack(batch, |t| &t.next_state, self.state_dim)?;
        let next_action = self.actor.forward_target(&next, m)?;
        let input = concat_rows(&next, self.state_dim, next_action.output(), self.action_dim);
        let q_next = self.critic.forward_target(&input, m)?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if t.terminal {
                    t.reward
                } else {
                    let best = q_next.output_row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    t.reward + self.cfg.discount * best
                }
            })
            .collect())
    }

    /// One critic step on mean squared TD error; returns the pre-step loss.
    pub fn critic_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        let m = batch.len();
        if m == 0 {
            return Err(Error::EmptyBatch);
        }
        let targets = self.td_targets(batch)?;
        let states = self.stack(batch, |t| &t.state, self.state_dim)?;
        let actions = self.stack(batch, |t| &t.cont_action, self.action_dim)?;
        let input = concat_rows(&states, self.state_dim, &actions, self.action_dim);
        let trace = self.critic.forward(&input, m)?;
        let mut d_out = vec![0.0; m * self.heads];
        let mut loss = 0.0;
        for (i, t) in batch.iter().enumerate() {
            let k = self.head_of(t);
            if k >= self.heads {
                return Err(Error::InvalidArgument(format!("discrete action {k} out of range")));
            }
            let err = trace.output_row(i)[k] - targets[i];
            loss += err * err;
            d_out[i * self.heads + k] = 2.0 * err / m as f64;
        }
        let (grad, _) = self.critic.backward(&trace, &d_out, false)?;
        self.critic.step(&grad, &self.cfg.critic_opt())?;
        Ok(loss / m as f64)
    }

    /// Ascent on `Q(s, ν(s))` at the stored discrete head; returns the
    /// pre-step mean value.
    pub fn actor_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        let m = batch.len();
        if m == 0 {
            return Err(Error::EmptyBatch);
        }
        let states = self.stack(batch, |t| &t.state, self.state_dim)?;
        let heads: Vec<usize> = batch.iter().map(|t| self.head_of(t)).collect();
        let critic = &self.critic;
        let (sd, ad, hn) = (self.state_dim, self.action_dim, self.heads);
        let mut value = 0.0;
        let dq = |actions: &[f64]| -> Result<Vec<f64>> {
            let input = concat_rows(&states, sd, actions, ad);
            let trace = critic.forward(&input, m)?;
            let mut d_out = vec![0.0; m * hn];
            for (i, &k) in heads.iter().enumerate() {
                value += trace.output_row(i)[k];
                d_out[i * hn + k] = 1.0 / m as f64;
            }
            let (_, d_in) = critic.backward(&trace, &d_out, true)?;
            Ok(column_block(&d_in.expect("input gradient requested"), sd + ad, sd, ad))
        };
        let grad = actor_gradient(&self.actor, &states, m, dq)?;
        self.actor.step(&grad, &self.cfg.actor_opt())?;
        Ok(value / m as f64)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.actor.soft_update(self.cfg.soft_update)?;
        self.critic.soft_update(self.cfg.soft_update)
    }

    pub fn encode(&self, e: &mut Encoder) {
        for net in [&self.actor, &self.critic] {
            e.params(&net.online);
            e.params(&net.target);
            e.optimizer(&net.opt);
        }
        e.rng(&self.noise_rng);
        e.rng(&self.replay_rng);
        e.f64(self.noise_scale);
        e.f64(self.epsilon);
        e.buffer(&self.buffer);
    }

    pub fn decode_into(&mut self, d: &mut Decoder<'_>) -> Result<()> {
        for net in [&mut self.actor, &mut self.critic] {
            let len = net.online.len();
            net.online = d.params(len)?;
            net.target = d.params(len)?;
            net.opt = d.optimizer(len)?;
        }
        self.noise_rng = d.rng()?;
        self.replay_rng = d.rng()?;
        self.noise_scale = d.f64()?;
        self.epsilon = d.f64()?;
        self.buffer = d.buffer()?;
        Ok(())
    }
}

/// `∇_θ mean_m Q(s_m, ν(s_m|θ))` as a descent direction (negated), given a
/// callback returning `∂Q/∂a` for a batch of actions.
pub(crate) fn actor_gradient(
    actor: &TwinNet,
    states: &[f64],
    batch: usize,
    mut dq_da: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let trace = actor.forward(states, batch)?;
    let mut d_action = dq_da(trace.output())?;
    for g in d_action.iter_mut() {
        *g = -*g;
    }
    let (grad, _) = actor.backward(&trace, &d_action, false)?;
    Ok(grad)
}

/// Seeds of the three learner streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnerSeeds {
    pub init: u64,
    pub noise: u64,
    pub replay: u64,
}

impl LearnerSeeds {
    pub fn from_master(master: u64) -> Self {
        use crate::seed::{stream_seed, Stream};
        Self {
            init: stream_seed(master, Stream::AgentInit),
            noise: stream_seed(master, Stream::Exploration),
            replay: stream_seed(master, Stream::Replay),
        }
    }
}
