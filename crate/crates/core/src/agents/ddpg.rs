use super::checkpoint::{AgentTag, Decoder, Encoder};
use super::learner::{ActorCritic, AgentConfig, LearnerSeeds, UpdateStats};
use super::replay::Transition;
use super::{Action, ActionBounds, Controller};
use crate::env::{mask_to_index, EnvState};
use crate::error::{Error, Result};

/// Scheduling component at or above which a device is scheduled.
pub const SCHEDULE_THRESHOLD: f64 = 0.5;

pub fn round_schedule(components: &[f64]) -> Vec<bool> {
    components.iter().map(|&x| x >= SCHEDULE_THRESHOLD).collect()
}

/// DDPG over a fully continuous `3N` action: schedule scores, then unit
/// powers, then unit frequencies. The schedule is recovered by rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddpg {
    bounds: ActionBounds,
    core: ActorCritic,
}

impl Ddpg {
    pub fn new(cfg: AgentConfig, bounds: ActionBounds, seeds: LearnerSeeds) -> Result<Self> {
        let n = bounds.len();
        if n == 0 {
            return Err(Error::InvalidConfig("DDPG needs at least one device".into()));
        }
        let core = ActorCritic::new(cfg, 2 * n, 3 * n, 1, seeds)?;
        Ok(Self { bounds, core })
    }

    pub fn select(&mut self, state: &[f64], explore: bool) -> Result<Vec<f64>> {
        self.core.continuous_action(state, explore)
    }

    pub fn to_action(&self, cont: Vec<f64>) -> Result<Action> {
        let n = self.bounds.len();
        let mask = round_schedule(&cont[..n]);
        let disc = mask_to_index(&mask);
        let decision = self.bounds.decision(mask, &cont[n..])?;
        Ok(Action { decision, cont, disc })
    }

    pub fn update(&mut self) -> Result<Option<UpdateStats>> {
        self.core.update()
    }

    pub fn checkpoint(&self) -> Vec<u8> {
        let mut e = Encoder::new(AgentTag::Ddpg);
        e.bytes(&serde_json::to_vec(&self.core.cfg).expect("config serialises"));
        e.f64s(&self.bounds.p_max);
        e.f64s(&self.bounds.f_max);
        self.core.encode(&mut e);
        e.finish()
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes, AgentTag::Ddpg)?;
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

impl Controller for Ddpg {
    fn name(&self) -> &'static str {
        "ddpg"
    }

    fn begin_episode(&mut self, episode: usize, total: usize) {
        self.core.begin_episode(episode, total);
    }

    fn act(&mut self, state: &EnvState, explore: bool) -> Result<Action> {
        let cont = self.select(&state.encoded, explore)?;
        self.to_action(cont)
    }

    fn observe(&mut self, t: Transition) -> Result<Option<UpdateStats>> {
        self.core.buffer.push(t);
        self.update()
    }

    fn checkpoint(&self) -> Option<Vec<u8>> {
        Some(Ddpg::checkpoint(self))
    }
}
