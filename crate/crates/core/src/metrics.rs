//! Value of learning, age of update and task-level weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::TaskRequirements;

/// Positive accuracy factor: `A/A_req`, capped at 1 once the requirement is met.
pub fn vol_accuracy(accuracy: f64, acc_req: f64) -> f64 {
    if accuracy <= acc_req {
        accuracy / acc_req
    } else {
        1.0
    }
}

/// Time factor: synchronous round time over the device's tolerance.
pub fn vol_time(round_time: f64, t_max: f64) -> f64 {
    round_time / t_max
}

pub fn vol_energy(energy: f64, e_max: f64) -> f64 {
    energy / e_max
}

/// Trade-off weights `(η1, η2, η3)` for accuracy, time and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolWeights {
    pub accuracy: f64,
    pub time: f64,
    pub energy: f64,
}

impl Default for VolWeights {
    fn default() -> Self {
        Self {
            accuracy: 1.0,
            time: 0.5,
            energy: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VolBreakdown {
    pub v_acc: f64,
    pub v_time: f64,
    pub v_energy: f64,
    /// `η1·V^A − η2·V^T − η3·V^E`
    pub weighted: f64,
}

impl VolBreakdown {
    pub fn new(v_acc: f64, v_time: f64, v_energy: f64, etas: &VolWeights) -> Self {
        Self {
            v_acc,
            v_time,
            v_energy,
            weighted: etas.accuracy * v_acc - etas.time * v_time - etas.energy * v_energy,
        }
    }

    pub fn evaluate(
        accuracy: f64,
        round_time: f64,
        energy: f64,
        req: &TaskRequirements,
        etas: &VolWeights,
    ) -> Self {
        Self::new(
            vol_accuracy(accuracy, req.acc_req),
            vol_time(round_time, req.t_max),
            vol_energy(energy, req.e_max),
            etas,
        )
    }
}

/// Rounds since each device's model was last aggregated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AouState {
    pub ages: Vec<u64>,
}

impl AouState {
    /// All ages start at 1.
    pub fn new(devices: usize) -> Self {
        Self {
            ages: vec![1; devices],
        }
    }

    pub fn update(&mut self, mask: &[bool]) -> Result<()> {
        if mask.len() != self.ages.len() {
            return Err(Error::dims("scheduling mask", self.ages.len(), mask.len()));
        }
        for (a, &z) in self.ages.iter_mut().zip(mask) {
            *a = if z { 1 } else { *a + 1 };
        }
        Ok(())
    }
}

pub fn update_aou(state: &AouState, mask: &[bool]) -> Result<AouState> {
    let mut next = state.clone();
    next.update(mask)?;
    Ok(next)
}

/// Balancing coefficients `(λ1, λ2, λ3)` of the requirement factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlwWeights {
    /// Per second.
    pub time: f64,
    /// Per joule.
    pub energy: f64,
    pub accuracy: f64,
}

impl TlwWeights {
    pub fn denominator(&self, req: &TaskRequirements) -> f64 {
        self.time * req.t_max + self.energy * req.e_max - self.accuracy * req.acc_req
    }

    /// `1 / (λ1·T_max + λ2·E_max − λ3·A_req)`; rejects non-positive denominators.
    pub fn requirement_factor(&self, req: &TaskRequirements) -> Result<f64> {
        let d = self.denominator(req);
        if d > 0.0 && d.is_finite() {
            Ok(1.0 / d)
        } else {
            Err(Error::InvalidConfig(format!(
                "task-level weight denominator {d} is not positive \
                 (T_max={}, E_max={}, A_req={})",
                req.t_max, req.e_max, req.acc_req
            )))
        }
    }

    pub fn validate(&self, requirements: &[TaskRequirements]) -> Result<()> {
        requirements
            .iter()
            .try_for_each(|r| self.requirement_factor(r).map(|_| ()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TlwMode {
    /// Requirement factor plus age-based fairness factor.
    Tlw,
    /// Every device weighted 1.
    EqualWeight,
}

/// Per-device task-level weight and its two factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tlw {
    pub requirement: Vec<f64>,
    pub fairness: Vec<f64>,
    pub total: Vec<f64>,
}

/// Fairness factors `a_n / Σ a_i`.
pub fn fairness_factors(aou: &AouState) -> Vec<f64> {
    let sum: u64 = aou.ages.iter().sum();
    aou.ages.iter().map(|&a| a as f64 / sum as f64).collect()
}

pub fn tlw(aou: &AouState, requirements: &[TaskRequirements], weights: &TlwWeights) -> Result<Tlw> {
    if requirements.len() != aou.ages.len() {
        return Err(Error::dims("task requirements", aou.ages.len(), requirements.len()));
    }
    let requirement = requirements
        .iter()
        .map(|r| weights.requirement_factor(r))
        .collect::<Result<Vec<_>>>()?;
    let fairness = fairness_factors(aou);
    let total = requirement.iter().zip(&fairness).map(|(r, f)| r + f).collect();
    Ok(Tlw {
        requirement,
        fairness,
        total,
    })
}

/// `Σ ε_n z_n (η1 V^A − η2 V^T − η3 V^E)`.
pub fn objective(weights: &[f64], mask: &[bool], vols: &[VolBreakdown]) -> Result<f64> {
    if mask.len() != weights.len() {
        return Err(Error::dims("scheduling mask", weights.len(), mask.len()));
    }
    if vols.len() != weights.len() {
        return Err(Error::dims("value-of-learning vector", weights.len(), vols.len()));
    }
    Ok(weights
        .iter()
        .zip(mask)
        .zip(vols)
        .filter(|((_, &z), _)| z)
        .map(|((w, _), v)| w * v.weighted)
        .sum())
}
