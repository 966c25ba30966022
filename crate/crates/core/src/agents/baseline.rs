use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionBounds, Controller};
use crate::env::{mask_to_index, EnvState, RoundDecision};
use crate::error::{Error, Result};

/// Random resource allocation: uniform mask, `p ~ U[0, p_max]`,
/// `f ~ U(0, f_max]`.
#[derive(Debug, Clone)]
pub struct RandomAllocation {
    bounds: ActionBounds,
    rng: ChaCha8Rng,
}

impl RandomAllocation {
    pub fn new(bounds: ActionBounds, seed: u64) -> Self {
        Self {
            bounds,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn decide(&mut self) -> RoundDecision {
        let n = self.bounds.len();
        let mask = (0..n).map(|_| self.rng.random::<bool>()).collect();
        let power = self.bounds.p_max.iter().map(|&p| p * self.rng.random::<f64>()).collect();
        // 1 − U[0,1) lies in (0, 1]
        let freq = self
            .bounds
            .f_max
            .iter()
            .map(|&f| f * (1.0 - self.rng.random::<f64>()))
            .collect();
        RoundDecision { mask, power, freq }
    }
}

impl Controller for RandomAllocation {
    fn name(&self) -> &'static str {
        "rra"
    }

    fn act(&mut self, _state: &EnvState, _explore: bool) -> Result<Action> {
        Ok(Action::from_decision(self.decide(), &self.bounds))
    }
}

/// Equal-weight rotation: a window of `window` consecutive device ids,
/// advanced by one every round, at half of each cap.
#[derive(Debug, Clone)]
pub struct Rotation {
    bounds: ActionBounds,
    window: usize,
    round: usize,
}

impl Rotation {
    pub fn new(bounds: ActionBounds, window: usize) -> Result<Self> {
        if window == 0 || window > bounds.len() {
            return Err(Error::InvalidConfig(format!(
                "rotation window {window} must lie in 1..={}",
                bounds.len()
            )));
        }
        Ok(Self {
            bounds,
            window,
            round: 0,
        })
    }

    pub fn decision_for_round(&self, round: usize) -> RoundDecision {
        let n = self.bounds.len();
        let mut mask = vec![false; n];
        for i in 0..self.window {
            mask[(round + i) % n] = true;
        }
        RoundDecision {
            mask,
            power: self.bounds.p_max.iter().map(|p| p / 2.0).collect(),
            freq: self.bounds.f_max.iter().map(|f| f / 2.0).collect(),
        }
    }
}

impl Controller for Rotation {
    fn name(&self) -> &'static str {
        "ew"
    }

    fn act(&mut self, _state: &EnvState, _explore: bool) -> Result<Action> {
        let d = self.decision_for_round(self.round);
        self.round += 1;
        Ok(Action::from_decision(d, &self.bounds))
    }
}

impl Action {
    /// Wraps a physical decision; the continuous part is its unit-box image.
    pub fn from_decision(decision: RoundDecision, bounds: &ActionBounds) -> Self {
        let cont = decision
            .power
            .iter()
            .zip(&bounds.p_max)
            .chain(decision.freq.iter().zip(&bounds.f_max))
            .map(|(x, cap)| x / cap)
            .collect();
        Action {
            disc: mask_to_index(&decision.mask),
            cont,
            decision,
        }
    }
}
