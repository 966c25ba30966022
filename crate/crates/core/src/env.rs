//! The scheduling MDP. One step runs one synchronous FML round: scheduled
//! devices meta-train locally, upload over the chosen access scheme and are
//! averaged at the server. The reward is the clipped task-level-weighted
//! value of learning of that round.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fml::{adapt, aggregate, evaluate_accuracy, local_round, BatchSampler, GlobalRoundState, MetaHyper, TaskDataset};
use crate::metrics::{objective, tlw, AouState, TlwMode, TlwWeights, VolBreakdown, VolWeights};
use crate::nn::{MlpModel, ParamVector};
use crate::radio::{round_costs, AccessScheme, ChannelModel, ChannelSnapshot, CostReport, DeviceProfile};
use crate::seed::{derive, Stream};

/// Largest device count the flat mask encoding supports.
pub const MAX_MASK_DEVICES: usize = 12;

/// Hybrid action: schedule mask plus per-device power (W) and CPU frequency (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDecision {
    pub mask: Vec<bool>,
    pub power: Vec<f64>,
    pub freq: Vec<f64>,
}

/// Projects onto `[0, cap]`; NaN maps to 0.
fn project(x: f64, cap: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, cap)
    }
}

impl RoundDecision {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn idle(devices: usize) -> Self {
        Self {
            mask: vec![false; devices],
            power: vec![0.0; devices],
            freq: vec![0.0; devices],
        }
    }

    pub fn check_dims(&self, devices: usize) -> Result<()> {
        for (what, len) in [
            ("scheduling mask", self.mask.len()),
            ("power vector", self.power.len()),
            ("frequency vector", self.freq.len()),
        ] {
            if len != devices {
                return Err(Error::dims(what, devices, len));
            }
        }
        Ok(())
    }

    /// Clamps power and frequency into each device's box.
    pub fn clamp_to(&mut self, profiles: &[DeviceProfile]) -> Result<()> {
        self.check_dims(profiles.len())?;
        for (n, p) in profiles.iter().enumerate() {
            self.power[n] = project(self.power[n], p.p_max);
            self.freq[n] = project(self.freq[n], p.f_max);
        }
        Ok(())
    }

    pub fn clamped(mut self, profiles: &[DeviceProfile]) -> Result<Self> {
        self.clamp_to(profiles)?;
        Ok(self)
    }

    pub fn within_boxes(&self, profiles: &[DeviceProfile]) -> bool {
        self.check_dims(profiles.len()).is_ok()
            && profiles.iter().enumerate().all(|(n, p)| {
                (0.0..=p.p_max).contains(&self.power[n]) && (0.0..=p.f_max).contains(&self.freq[n])
            })
    }

    pub fn scheduled(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &z)| z).map(|(n, _)| n)
    }

    /// Flat index with bit `n` set iff device `n` is scheduled.
    pub fn mask_index(&self) -> usize {
        mask_to_index(&self.mask)
    }
}

pub fn mask_to_index(mask: &[bool]) -> usize {
    mask.iter()
        .enumerate()
        .fold(0, |acc, (n, &z)| acc | (usize::from(z) << n))
}

pub fn index_to_mask(index: usize, devices: usize) -> Vec<bool> {
    (0..devices).map(|n| index >> n & 1 == 1).collect()
}

/// Min-max normalisation bounds for the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEncoder {
    /// `log10` gain bounds.
    pub gain_log10: (f64, f64),
    pub weight: (f64, f64),
}

fn unit(x: f64, (lo, hi): (f64, f64)) -> f64 {
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

impl StateEncoder {
    /// Gains (as `log10`) then weights, each mapped into `[0, 1]`.
    pub fn encode(&self, gains: &[f64], weights: &[f64]) -> Vec<f64> {
        gains
            .iter()
            .map(|g| unit(g.log10(), self.gain_log10))
            .chain(weights.iter().map(|w| unit(*w, self.weight)))
            .collect()
    }
}

pub fn encode_state(gains: &[f64], weights: &[f64], encoder: &StateEncoder) -> Vec<f64> {
    encoder.encode(gains, weights)
}

/// Observation at slot `slot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub slot: usize,
    pub gains: Vec<f64>,
    /// Task-level weights currently in force.
    pub weights: Vec<f64>,
    pub encoded: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// The decision after clamping.
    pub decision: RoundDecision,
    pub costs: CostReport,
    /// Zeroed for unscheduled devices.
    pub vols: Vec<VolBreakdown>,
    /// Post-adaptation accuracy of each scheduled device's local model.
    pub accuracy: Vec<Option<f64>>,
    /// Mean post-adaptation accuracy of the new global model over all devices.
    pub mean_accuracy: f64,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: EnvState,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub slots_per_episode: usize,
    pub scheme: AccessScheme,
    pub tlw_mode: TlwMode,
    pub tlw_weights: TlwWeights,
    pub vol_weights: VolWeights,
    pub gain_log10_bounds: (f64, f64),
    pub meta: MetaHyper,
}

/// Everything fixed for the lifetime of an environment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub profiles: Vec<DeviceProfile>,
    pub tasks: Vec<TaskDataset>,
    pub channel: ChannelModel,
    pub model: MlpModel,
    /// Global model at the start of every episode.
    pub init_params: ParamVector,
}

#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    scn: Scenario,
    encoder: StateEncoder,
    fl: GlobalRoundState,
    aou: AouState,
    snapshot: ChannelSnapshot,
    weights: Vec<f64>,
    slot: usize,
    fading: ChaCha8Rng,
    sampler: BatchSampler,
}

impl Env {
    pub fn new(cfg: EnvConfig, scn: Scenario) -> Result<Self> {
        let n = scn.profiles.len();
        if n == 0 {
            return Err(Error::InvalidConfig("at least one device is required".into()));
        }
        if scn.tasks.len() != n {
            return Err(Error::dims("task datasets", n, scn.tasks.len()));
        }
        if cfg.slots_per_episode == 0 {
            return Err(Error::InvalidConfig("slots_per_episode must be at least 1".into()));
        }
        let (lo, hi) = cfg.gain_log10_bounds;
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!("gain bounds ({lo}, {hi}) must be increasing")));
        }
        for p in &scn.profiles {
            p.validate()?;
        }
        for t in &scn.tasks {
            t.validate()?;
        }
        cfg.meta.validate()?;
        let reqs: Vec<_> = scn.profiles.iter().map(|p| p.requirements).collect();
        cfg.tlw_weights.validate(&reqs)?;
        if scn.init_params.len() != scn.model.spec.param_count() {
            return Err(Error::dims("initial model", scn.model.spec.param_count(), scn.init_params.len()));
        }

        let weight = match cfg.tlw_mode {
            TlwMode::Tlw => {
                let factors: Vec<f64> = reqs
                    .iter()
                    .map(|r| cfg.tlw_weights.requirement_factor(r))
                    .collect::<Result<_>>()?;
                let lo = factors.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = factors.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
                (lo, hi)
            }
            TlwMode::EqualWeight => (0.0, 2.0),
        };
        let encoder = StateEncoder {
            gain_log10: cfg.gain_log10_bounds,
            weight,
        };
        let snapshot = scn.channel.snapshot_with_fading(&scn.profiles, &vec![1.0; n])?;
        let mut env = Self {
            fl: GlobalRoundState::new(scn.init_params.clone(), n),
            aou: AouState::new(n),
            weights: vec![1.0; n],
            snapshot,
            slot: 0,
            fading: crate::seed::stream_rng(0, Stream::Fading),
            sampler: BatchSampler::new(0),
            encoder,
            cfg,
            scn,
        };
        env.weights = env.current_weights()?;
        Ok(env)
    }

    pub fn num_devices(&self) -> usize {
        self.scn.profiles.len()
    }

    pub fn state_len(&self) -> usize {
        2 * self.num_devices()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scn
    }

    pub fn profiles(&self) -> &[DeviceProfile] {
        &self.scn.profiles
    }

    pub fn encoder(&self) -> &StateEncoder {
        &self.encoder
    }

    pub fn global_model(&self) -> &ParamVector {
        &self.fl.global_model
    }

    pub fn round_state(&self) -> &GlobalRoundState {
        &self.fl
    }

    pub fn aou(&self) -> &AouState {
        &self.aou
    }

    pub fn snapshot(&self) -> &ChannelSnapshot {
        &self.snapshot
    }

    fn current_weights(&self) -> Result<Vec<f64>> {
        match self.cfg.tlw_mode {
            TlwMode::Tlw => {
                let reqs: Vec<_> = self.scn.profiles.iter().map(|p| p.requirements).collect();
                Ok(tlw(&self.aou, &reqs, &self.cfg.tlw_weights)?.total)
            }
            TlwMode::EqualWeight => Ok(vec![1.0; self.num_devices()]),
        }
    }

    pub fn state(&self) -> EnvState {
        EnvState {
            slot: self.slot,
            gains: self.snapshot.gains.clone(),
            weights: self.weights.clone(),
            encoded: self.encoder.encode(&self.snapshot.gains, &self.weights),
        }
    }

    /// Starts an episode: model back to its initial value, ages to 1, and
    /// fading and batch sampling reseeded from `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<EnvState> {
        use rand::SeedableRng;
        let n = self.num_devices();
        self.fl = GlobalRoundState::new(self.scn.init_params.clone(), n);
        self.aou = AouState::new(n);
        self.slot = 0;
        self.fading = ChaCha8Rng::seed_from_u64(derive(seed, Stream::Fading as u64));
        self.sampler = BatchSampler::new(derive(seed, Stream::Sampler as u64));
        self.snapshot = self.scn.channel.draw(&self.scn.profiles, &mut self.fading);
        self.weights = self.current_weights()?;
        Ok(self.state())
    }

    /// Mean accuracy over all devices after one full-train-set inner step
    /// from `params`.
    pub fn personalised_accuracy(&self, params: &ParamVector) -> Result<f64> {
        let mut sum = 0.0;
        for task in &self.scn.tasks {
            let adapted = adapt(&self.scn.model, params, &task.train, self.cfg.meta.alpha)?;
            sum += evaluate_accuracy(&self.scn.model, &adapted, &task.test)?;
        }
        Ok(sum / self.num_devices() as f64)
    }

    pub fn step(&mut self, decision: &RoundDecision) -> Result<StepOutcome> {
        let n = self.num_devices();
        let decision = decision.clone().clamped(&self.scn.profiles)?;
        let costs = round_costs(&self.scn.profiles, &self.snapshot, &decision, self.cfg.scheme)?;
        let feasible = costs.is_feasible();

        let mut vols = vec![VolBreakdown::default(); n];
        let mut accuracy = vec![None; n];
        let mut objective_value = 0.0;
        if feasible {
            let mut locals = Vec::new();
            for k in decision.scheduled() {
                let task = &self.scn.tasks[k];
                let local = local_round(&self.scn.model, task, &mut self.sampler, &self.fl.global_model, &self.cfg.meta)?;
                let adapted = adapt(&self.scn.model, &local, &task.train, self.cfg.meta.alpha)?;
                let acc = evaluate_accuracy(&self.scn.model, &adapted, &task.test)?;
                accuracy[k] = Some(acc);
                vols[k] = VolBreakdown::evaluate(
                    acc,
                    costs.round_time,
                    costs.energy(k),
                    &self.scn.profiles[k].requirements,
                    &self.cfg.vol_weights,
                );
                self.fl.local_models[k] = local.clone();
                locals.push(local);
            }
            let global = aggregate(&locals, &self.fl.global_model)?;
            if !global.is_finite() {
                return Err(Error::NonFinite("global model"));
            }
            self.fl.global_model = global;
            objective_value = objective(&self.weights, &decision.mask, &vols)?;
        }
        let reward = objective_value.max(0.0);

        self.aou.update(&decision.mask)?;
        self.weights = self.current_weights()?;
        self.fl.round += 1;
        self.slot += 1;
        self.snapshot = self.scn.channel.draw(&self.scn.profiles, &mut self.fading);
        let mean_accuracy = self.personalised_accuracy(&self.fl.global_model)?;

        Ok(StepOutcome {
            reward,
            next_state: self.state(),
            done: self.slot >= self.cfg.slots_per_episode,
            info: StepInfo {
                decision,
                costs,
                vols,
                accuracy,
                mean_accuracy,
                objective: objective_value,
                feasible,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fml::make_synthetic_tasks;
    use crate::nn::{Activation, LossKind, MlpSpec};
    use crate::radio::{PathLoss, TaskRequirements};
    use rand::SeedableRng;

    fn profile(id: usize, position: [f64; 2], data_size: usize) -> DeviceProfile {
        DeviceProfile {
            id,
            data_size,
            cycles_per_sample: 1e7,
            f_max: 1e10,
            p_max: 0.1,
            capacitance_half: 1e-28,
            model_bits: 1e6,
            position,
            requirements: TaskRequirements {
                acc_req: 0.8,
                t_max: 10.0,
                e_max: 1.0,
            },
        }
    }

    fn test_env(n: usize, equidistant: bool) -> Env {
        let tasks = make_synthetic_tasks(n, 3, 0.5).unwrap();
        let profiles = (0..n)
            .map(|i| {
                let r = if equidistant { 100.0 } else { 30.0 + 40.0 * i as f64 };
                let a = i as f64;
                profile(i, [r * a.cos(), r * a.sin()], tasks[i].data_size())
            })
            .collect();
        let spec = MlpSpec::new(vec![2, 8, 3], Activation::Tanh, Activation::Identity).unwrap();
        let init = spec.init_params(&mut ChaCha8Rng::seed_from_u64(1));
        let scn = Scenario {
            profiles,
            tasks,
            channel: ChannelModel {
                path_loss: PathLoss::from_carrier(3.76, 1e9, 1.0),
                bandwidth: 1e6,
                noise_density_dbm_per_hz: -174.0,
            },
            model: MlpModel::new(spec, LossKind::CrossEntropy),
            init_params: init,
        };
        let cfg = EnvConfig {
            slots_per_episode: 4,
            scheme: AccessScheme::Noma,
            tlw_mode: TlwMode::Tlw,
            tlw_weights: TlwWeights {
                time: 1.0,
                energy: 10.0,
                accuracy: 0.1,
            },
            vol_weights: VolWeights::default(),
            gain_log10_bounds: (-15.0, -3.0),
            meta: MetaHyper::default(),
        };
        Env::new(cfg, scn).unwrap()
    }

    fn light_decision(n: usize, mask: Vec<bool>) -> RoundDecision {
        RoundDecision {
            mask,
            power: vec![0.1; n],
            freq: vec![1e9; n],
        }
    }

    #[test]
    fn mask_index_roundtrip() {
        assert_eq!(mask_to_index(&[true, false, true]), 5);
        assert_eq!(index_to_mask(5, 3), vec![true, false, true]);
        for i in 0..1024 {
            assert_eq!(mask_to_index(&index_to_mask(i, 10)), i);
        }
    }

    #[test]
    fn encoder_endpoints() {
        let enc = StateEncoder {
            gain_log10: (-12.0, -10.0),
            weight: (0.0, 2.0),
        };
        let v = enc.encode(&[1e-12, 1e-10, 1e-11], &[1.0]);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 1.0);
        assert!((v[2] - 0.5).abs() < 1e-12);
        assert_eq!(v[3], 0.5);
    }

    #[test]
    fn clamping_projects_into_boxes() {
        let profiles = vec![profile(0, [10.0, 0.0], 50), profile(1, [0.0, 10.0], 50)];
        let d = RoundDecision {
            mask: vec![true, true],
            power: vec![-1.0, f64::NAN],
            freq: vec![5e10, f64::INFINITY],
        }
        .clamped(&profiles)
        .unwrap();
        assert_eq!(d.power, vec![0.0, 0.0]);
        assert_eq!(d.freq, vec![1e10, 1e10]);
        assert!(d.within_boxes(&profiles));
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = test_env(10, false);
        let mut b = test_env(10, false);
        let sa = a.reset(11).unwrap();
        assert_eq!(sa, b.reset(11).unwrap());
        assert_eq!(sa.encoded.len(), 20);
        assert!(sa.encoded.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn equidistant_devices_share_channel_components() {
        let env = test_env(4, true);
        let s = env.state();
        assert!(s.encoded[..4].iter().all(|&x| x == s.encoded[0]));
    }

    #[test]
    fn empty_schedule() {
        let mut env = test_env(3, false);
        env.reset(0).unwrap();
        let before = env.global_model().clone();
        let out = env.step(&RoundDecision::idle(3)).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.info.objective, 0.0);
        assert_eq!(env.global_model(), &before);
        assert_eq!(env.aou().ages, vec![2, 2, 2]);
    }

    #[test]
    fn reward_clips_objective() {
        let mut env = test_env(3, false);
        env.reset(5).unwrap();
        // maximum frequency costs ~10 J per device, far past every energy cap
        let heavy = RoundDecision {
            mask: vec![true; 3],
            power: vec![0.1; 3],
            freq: vec![1e10; 3],
        };
        let out = env.step(&heavy).unwrap();
        assert!(out.info.objective < 0.0);
        assert_eq!(out.reward, 0.0);
        let out = env.step(&light_decision(3, vec![true, false, false])).unwrap();
        assert_eq!(out.reward, out.info.objective.max(0.0));
        assert!(out.info.objective > 0.0);
    }

    #[test]
    fn infeasible_decision_flagged() {
        let mut env = test_env(2, false);
        env.reset(0).unwrap();
        let mut d = light_decision(2, vec![true, true]);
        d.freq[1] = 0.0;
        let out = env.step(&d).unwrap();
        assert!(!out.info.feasible);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.info.costs.infeasible, vec![1]);
    }

    #[test]
    fn episode_ends_after_configured_slots() {
        let mut env = test_env(2, false);
        env.reset(0).unwrap();
        let d = light_decision(2, vec![true, true]);
        let dones: Vec<bool> = (0..4).map(|_| env.step(&d).unwrap().done).collect();
        assert_eq!(dones, vec![false, false, false, true]);
    }

    #[test]
    fn scheduled_device_fairness_not_above_unscheduled() {
        let mut env = test_env(4, false);
        env.reset(2).unwrap();
        let out = env.step(&light_decision(4, vec![true, false, true, false])).unwrap();
        let ages = &env.aou().ages;
        let total: u64 = ages.iter().sum();
        let fair: Vec<f64> = ages.iter().map(|&a| a as f64 / total as f64).collect();
        assert!(fair[0] <= fair[1] && fair[2] <= fair[3]);
        assert!(out.next_state.weights.iter().all(|w| w.is_finite()));
    }
}
