use super::checkpoint::{AgentTag, Decoder, Encoder};
use super::learner::{ActorCritic, AgentConfig, LearnerSeeds, UpdateStats};
use super::replay::{ReplayBuffer, Transition};
use super::{Action, ActionBounds, Controller};
use crate::env::{index_to_mask, EnvState, MAX_MASK_DEVICES};
use crate::error::{Error, Result};
use crate::nn::ParamVector;

/// Parameterised deep Q-network over all `2^N` schedule masks.
///
/// The actor emits one shared vector of unit-box powers and frequencies;
/// the Q-network scores every mask given that vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdqn {
    bounds: ActionBounds,
    core: ActorCritic,
}

impl Pdqn {
    pub fn new(cfg: AgentConfig, bounds: ActionBounds, seeds: LearnerSeeds) -> Result<Self> {
        let n = bounds.len();
        if n == 0 || n > MAX_MASK_DEVICES {
            return Err(Error::InvalidConfig(format!(
                "PDQN supports 1..={MAX_MASK_DEVICES} devices, got {n}"
            )));
        }
        let core = ActorCritic::new(cfg, 2 * n, 2 * n, 1 << n, seeds)?;
        Ok(Self { bounds, core })
    }

    pub fn num_masks(&self) -> usize {
        self.core.heads
    }

    pub fn config(&self) -> &AgentConfig {
        &self.core.cfg
    }

    pub fn bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.core.buffer
    }

    pub fn remember(&mut self, t: Transition) {
        self.core.buffer.push(t);
    }

    pub fn set_exploration(&mut self, noise: f64, epsilon: f64) {
        self.core.noise_scale = noise;
        self.core.epsilon = epsilon;
    }

    pub fn q_values(&self, state: &[f64], cont: &[f64]) -> Result<Vec<f64>> {
        self.core.q_values(state, cont)
    }

    pub fn actor_output(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.core.actor_output(state)
    }

    /// `(A^p, A^d)`: the unit-box continuous action and the mask index.
    pub fn select(&mut self, state: &[f64], explore: bool) -> Result<(Vec<f64>, usize)> {
        let cont = self.core.continuous_action(state, explore)?;
        let disc = self.core.discrete_action(state, &cont, explore)?;
        Ok((cont, disc))
    }

    pub fn update(&mut self) -> Result<Option<UpdateStats>> {
        self.core.update()
    }

    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        self.core.td_targets(batch)
    }

    pub fn critic_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        self.core.critic_step(batch)
    }

    pub fn actor_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        self.core.actor_step(batch)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.core.soft_update_targets()
    }

    /// Online actor, online critic, target actor, target critic.
    pub fn parameters(&self) -> [&ParamVector; 4] {
        [
            &self.core.actor.online,
            &self.core.critic.online,
            &self.core.actor.target,
            &self.core.critic.target,
        ]
    }

    /// One actor ascent step against an arbitrary `∂Q/∂a` oracle.
    pub fn actor_step_with(
        &mut self,
        states: &[f64],
        batch: usize,
        dq_da: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<()> {
        let grad = super::learner::actor_gradient(&self.core.actor, states, batch, dq_da)?;
        let opt = crate::nn::OptimizerConfig::adam(self.core.cfg.actor_lr);
        self.core.actor.step(&grad, &opt)
    }

    pub fn checkpoint(&self) -> Vec<u8> {
        let mut e = Encoder::new(AgentTag::Pdqn);
        e.bytes(&serde_json::to_vec(&self.core.cfg).expect("config serialises"));
        e.f64s(&self.bounds.p_max);
        e.f64s(&self.bounds.f_max);
        self.core.encode(&mut e);
        e.finish()
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes, AgentTag::Pdqn)?;
        let cfg: AgentConfig = serde_json::from_slice(d.bytes()?).map_err(|e| Error::Format {
            what: "checkpoint",
            reason: e.to_string(),
        })?;
        let bounds = ActionBounds::new(d.f64s()?, d.f64s()?)?;
        let mut agent = Self::new(cfg, bounds, LearnerSeeds { init: 0, noise: 0, replay: 0 })?;
        agent.core.decode_into(&mut d)?;
        d.finish()?;
        Ok(agent)
    }
}

impl Controller for Pdqn {
    fn name(&self) -> &'static str {
        "pdqn"
    }

    fn begin_episode(&mut self, episode: usize, total: usize) {
        self.core.begin_episode(episode, total);
    }

    fn act(&mut self, state: &EnvState, explore: bool) -> Result<Action> {
        let (cont, disc) = self.select(&state.encoded, explore)?;
        let mask = index_to_mask(disc, self.bounds.len());
        let decision = self.bounds.decision(mask, &cont)?;
        Ok(Action { decision, cont, disc })
    }

    fn observe(&mut self, t: Transition) -> Result<Option<UpdateStats>> {
        self.remember(t);
        self.update()
    }

    fn checkpoint(&self) -> Option<Vec<u8>> {
        Some(Pdqn::checkpoint(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> AgentConfig {
        AgentConfig {
            hidden: vec![16],
            batch_size: 4,
            buffer_capacity: 32,
            ..AgentConfig::default()
        }
    }

    fn agent(cfg: AgentConfig) -> Pdqn {
        let bounds = ActionBounds::new(vec![0.1; 2], vec![1e10; 2]).unwrap();
        Pdqn::new(cfg, bounds, LearnerSeeds::from_master(3)).unwrap()
    }

    fn transition(i: usize, reward: f64, terminal: bool) -> Transition {
        let x = i as f64 / 10.0;
        Transition {
            state: vec![x, 1.0 - x, 0.5, x * x],
            cont_action: vec![0.2, 0.4, 0.6, x],
            disc_action: i % 4,
            reward,
            next_state: vec![1.0 - x, x, 0.3, 0.1],
            terminal,
        }
    }

    #[test]
    fn greedy_selection_is_deterministic() {
        let mut a = agent(small_cfg());
        let s = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(a.select(&s, false).unwrap(), a.select(&s, false).unwrap());
        a.set_exploration(0.0, 0.0);
        let greedy = a.select(&s, false).unwrap();
        assert_eq!(a.select(&s, true).unwrap(), greedy);
        let (cont, disc) = greedy;
        let q = a.q_values(&s, &cont).unwrap();
        assert_eq!(disc, crate::agents::greedy_index(&q));
        assert_eq!(q.len(), 4);
    }

    #[test]
    fn exploration_stays_in_unit_box() {
        let mut a = agent(small_cfg());
        a.set_exploration(5.0, 0.5);
        for i in 0..200 {
            let (cont, disc) = a.select(&[i as f64 / 200.0, 0.0, 1.0, 0.5], true).unwrap();
            assert!(cont.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!(disc < 4);
        }
    }

    #[test]
    fn td_target_values() {
        let a = agent(small_cfg());
        let t = transition(1, 1.0, false);
        let next_action = a.actor_output(&t.next_state).unwrap();
        let best = a
            .core
            .critic
            .spec
            .forward_batch(&a.core.critic.target, &[t.next_state.clone(), next_action].concat(), 1)
            .unwrap()
            .output()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let y = a.td_targets(&[&t]).unwrap()[0];
        assert!((y - (1.0 + 0.95 * best)).abs() < 1e-12);
        let end = transition(1, 1.0, true);
        assert_eq!(a.td_targets(&[&end]).unwrap()[0], 1.0);
    }

    #[test]
    fn zero_learning_rates_freeze_networks() {
        let mut a = agent(AgentConfig {
            actor_lr: 0.0,
            critic_lr: 0.0,
            ..small_cfg()
        });
        let before: Vec<ParamVector> = a.parameters().iter().map(|p| (*p).clone()).collect();
        let batch: Vec<Transition> = (0..4).map(|i| transition(i, 0.5, false)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = a.td_targets(&refs).unwrap();
        let q: Vec<f64> = batch
            .iter()
            .map(|t| a.q_values(&t.state, &t.cont_action).unwrap()[t.disc_action])
            .collect();
        let expected = q.iter().zip(&y).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / 4.0;
        let loss = a.critic_step(&refs).unwrap();
        assert!((loss - expected).abs() < 1e-12);
        a.actor_step(&refs).unwrap();
        assert_eq!(a.parameters()[0], &before[0]);
        assert_eq!(a.parameters()[1], &before[1]);
    }

    #[test]
    fn empty_buffer_update_is_noop() {
        let mut a = agent(small_cfg());
        let before = a.clone();
        assert_eq!(a.update().unwrap(), None);
        assert_eq!(a, before);
    }

    #[test]
    fn full_buffer_gate() {
        let mut a = agent(AgentConfig {
            learn_when_full: true,
            ..small_cfg()
        });
        for i in 0..31 {
            a.remember(transition(i, 0.1, false));
            assert!(a.update().unwrap().is_none());
        }
        a.remember(transition(31, 0.1, false));
        assert!(a.update().unwrap().is_some());
    }

    #[test]
    fn checkpoint_resumes_bit_exact() {
        let mut a = agent(small_cfg());
        for i in 0..10 {
            a.remember(transition(i, 0.3, i % 5 == 4));
            a.update().unwrap();
        }
        let _ = a.select(&[0.1, 0.2, 0.3, 0.4], true).unwrap();
        let mut b = Pdqn::restore(&a.checkpoint()).unwrap();
        assert_eq!(a, b);
        for i in 10..20 {
            a.remember(transition(i, 0.2, false));
            b.remember(transition(i, 0.2, false));
            assert_eq!(a.update().unwrap(), b.update().unwrap());
            let s = [0.5, 0.1, 0.9, 0.0];
            assert_eq!(a.select(&s, true).unwrap(), b.select(&s, true).unwrap());
        }
        assert_eq!(a.checkpoint(), b.checkpoint());
        let mut bytes = a.checkpoint();
        bytes.truncate(bytes.len() - 3);
        assert!(Pdqn::restore(&bytes).is_err());
    }

    #[test]
    fn pdqn_rejects_too_many_devices() {
        let bounds = ActionBounds::new(vec![0.1; 13], vec![1e10; 13]).unwrap();
        assert!(Pdqn::new(small_cfg(), bounds, LearnerSeeds::from_master(0)).is_err());
    }
}
