//! Schedulers: PDQN, DDPG with rounding, random allocation and rotation.

mod baseline;
mod checkpoint;
mod ddpg;
mod learner;
mod net;
mod pdqn;
mod replay;

pub use baseline::{RandomAllocation, Rotation};
pub use checkpoint::{AgentTag, MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use ddpg::{round_schedule, Ddpg, SCHEDULE_THRESHOLD};
pub use learner::{AgentConfig, LearnerSeeds, UpdateStats};
pub use net::greedy_index;
pub use pdqn::Pdqn;
pub use replay::{ReplayBuffer, Transition};

use serde::{Deserialize, Serialize};

use crate::env::{EnvState, RoundDecision};
use crate::error::{Error, Result};
use crate::radio::DeviceProfile;

/// Per-device power and frequency caps used to map unit-box actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub p_max: Vec<f64>,
    pub f_max: Vec<f64>,
}

impl ActionBounds {
    pub fn new(p_max: Vec<f64>, f_max: Vec<f64>) -> Result<Self> {
        if p_max.len() != f_max.len() {
            return Err(Error::dims("frequency caps", p_max.len(), f_max.len()));
        }
        if !p_max.iter().chain(&f_max).all(|&c| c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig("action caps must be positive".into()));
        }
        Ok(Self { p_max, f_max })
    }

    pub fn from_profiles(profiles: &[DeviceProfile]) -> Self {
        Self {
            p_max: profiles.iter().map(|p| p.p_max).collect(),
            f_max: profiles.iter().map(|p| p.f_max).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.p_max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_max.is_empty()
    }

    /// Physical decision from a mask and `[unit powers, unit frequencies]`.
    pub fn decision(&self, mask: Vec<bool>, unit: &[f64]) -> Result<RoundDecision> {
        let n = self.len();
        if unit.len() != 2 * n {
            return Err(Error::dims("unit action", 2 * n, unit.len()));
        }
        let scale = |u: f64, cap: f64| if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) * cap };
        Ok(RoundDecision {
            mask,
            power: (0..n).map(|k| scale(unit[k], self.p_max[k])).collect(),
            freq: (0..n).map(|k| scale(unit[n + k], self.f_max[k])).collect(),
        })
    }
}

/// What a controller hands to the environment and to its replay memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub decision: RoundDecision,
    /// Unit-box continuous action as stored for learning.
    pub cont: Vec<f64>,
    /// Flat mask index of the decision.
    pub disc: usize,
}

/// A scheduling policy driven by the experiment loop.
pub trait Controller {
    fn name(&self) -> &'static str;

    /// Called before the first slot of every episode.
    fn begin_episode(&mut self, _episode: usize, _total_episodes: usize) {}

    fn act(&mut self, state: &EnvState, explore: bool) -> Result<Action>;

    /// Stores the transition and learns when the agent learns at all.
    fn observe(&mut self, _transition: Transition) -> Result<Option<UpdateStats>> {
        Ok(None)
    }

    /// Serialised learner state, for agents that have one.
    fn checkpoint(&self) -> Option<Vec<u8>> {
        None
    }
}
