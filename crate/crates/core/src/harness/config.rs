//! Experiment configuration. Every field has a default, so an empty TOML
//! document is a valid configuration.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentConfig;
use crate::env::{EnvConfig, Scenario, MAX_MASK_DEVICES};
use crate::error::{Error, Result};
use crate::fml::{MetaHyper, SyntheticTaskConfig};
use crate::metrics::{TlwMode, TlwWeights, VolWeights};
use crate::nn::{Activation, LossKind, MlpModel, MlpSpec};
use crate::radio::{AccessScheme, ChannelModel, DeviceProfile, PathLoss, TaskRequirements};
use crate::seed::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Pdqn,
    Ddpg,
    Rra,
    Ew,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Pdqn => "pdqn",
            AgentKind::Ddpg => "ddpg",
            AgentKind::Rra => "rra",
            AgentKind::Ew => "ew",
        }
    }
}

/// Physical constants shared by every device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub path_loss_exponent: f64,
    /// Distance at which free-space loss anchors the path-loss curve, m.
    pub reference_distance_m: f64,
    pub noise_dbm_per_hz: f64,
    pub p_max_w: f64,
    pub f_max_hz: f64,
    pub cycles_per_sample: f64,
    /// Effective capacitance coefficient `τ/2`.
    pub capacitance_half: f64,
    pub model_bits: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            carrier_hz: 1e9,
            bandwidth_hz: 1e6,
            path_loss_exponent: 3.76,
            reference_distance_m: 1.0,
            noise_dbm_per_hz: -174.0,
            p_max_w: 0.1,
            f_max_hz: 1e10,
            cycles_per_sample: 1e7,
            capacitance_half: 1e-29,
            model_bits: 1e6,
        }
    }
}

/// Closed ranges from which per-device requirements are drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequirementRanges {
    pub acc_req: [f64; 2],
    pub t_max_s: [f64; 2],
    pub e_max_j: [f64; 2],
}

impl Default for RequirementRanges {
    fn default() -> Self {
        Self {
            acc_req: [0.7, 1.0],
            t_max_s: [0.1, 10.0],
            e_max_j: [0.01, 1.0],
        }
    }
}

/// Task model architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for TaskModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub devices: usize,
    pub area_side_m: f64,
    pub episodes: usize,
    pub slots_per_episode: usize,
    pub scheme: AccessScheme,
    pub agent: AgentKind,
    /// Defaults to equal weights for the rotation baseline and to task-level
    /// weights otherwise.
    pub tlw_mode: Option<TlwMode>,
    /// Devices per round for the rotation baseline.
    pub rotation_window: usize,
    /// Non-IID degree of the synthetic tasks, in [0, 1].
    pub noniid: f64,
    /// `log10` gain bounds for state normalisation.
    pub gain_log10_bounds: [f64; 2],
    pub physics: Physics,
    pub requirements: RequirementRanges,
    pub tlw: TlwWeights,
    pub vol: VolWeights,
    pub tasks: SyntheticTaskConfig,
    pub task_model: TaskModelConfig,
    pub meta: MetaHyper,
    pub learner: AgentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            devices: 10,
            area_side_m: 500.0,
            episodes: 500,
            slots_per_episode: 20,
            scheme: AccessScheme::Noma,
            agent: AgentKind::Pdqn,
            tlw_mode: None,
            rotation_window: 5,
            noniid: 1.0,
            gain_log10_bounds: [-15.0, -3.0],
            physics: Physics::default(),
            requirements: RequirementRanges::default(),
            tlw: TlwWeights {
                time: 1.0,
                energy: 10.0,
                accuracy: 0.1,
            },
            vol: VolWeights::default(),
            tasks: SyntheticTaskConfig::default(),
            task_model: TaskModelConfig::default(),
            meta: MetaHyper::default(),
            learner: AgentConfig::default(),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn invalid(m: impl Into<String>) -> Error {
    Error::InvalidConfig(m.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises to TOML")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn tlw_mode(&self) -> TlwMode {
        self.tlw_mode.unwrap_or(match self.agent {
            AgentKind::Ew => TlwMode::EqualWeight,
            _ => TlwMode::Tlw,
        })
    }

    /// `agent-scheme-mode`, e.g. `pdqn-noma-tlw`.
    pub fn arm_label(&self) -> String {
        let mode = match self.tlw_mode() {
            TlwMode::Tlw => "tlw",
            TlwMode::EqualWeight => "ew",
        };
        let scheme = match self.scheme {
            AccessScheme::Noma => "noma",
            AccessScheme::Oma => "oma",
        };
        format!("{}-{scheme}-{mode}", self.agent.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices == 0 || self.devices > MAX_MASK_DEVICES {
            return Err(invalid(format!(
                "devices must lie in 1..={MAX_MASK_DEVICES}, got {}",
                self.devices
            )));
        }
        if self.episodes == 0 || self.slots_per_episode == 0 {
            return Err(invalid("episodes and slots_per_episode must be at least 1"));
        }
        if !(self.area_side_m > 0.0 && self.area_side_m.is_finite()) {
            return Err(invalid("area side must be positive"));
        }
        if !(0.0..=1.0).contains(&self.noniid) {
            return Err(invalid("noniid must lie in [0, 1]"));
        }
        if self.agent == AgentKind::Ew && !(1..=self.devices).contains(&self.rotation_window) {
            return Err(invalid("rotation_window must lie in 1..=devices"));
        }
        let [g_lo, g_hi] = self.gain_log10_bounds;
        if !(g_lo < g_hi) {
            return Err(invalid("gain_log10_bounds must be increasing"));
        }
        let p = &self.physics;
        for (name, v) in [
            ("carrier_hz", p.carrier_hz),
            ("bandwidth_hz", p.bandwidth_hz),
            ("path_loss_exponent", p.path_loss_exponent),
            ("reference_distance_m", p.reference_distance_m),
            ("p_max_w", p.p_max_w),
            ("f_max_hz", p.f_max_hz),
            ("cycles_per_sample", p.cycles_per_sample),
            ("capacitance_half", p.capacitance_half),
            ("model_bits", p.model_bits),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("physics.{name} must be positive")));
            }
        }
        if !p.noise_dbm_per_hz.is_finite() {
            return Err(invalid("physics.noise_dbm_per_hz must be finite"));
        }
        let r = &self.requirements;
        let sane = |[lo, hi]: [f64; 2]| lo > 0.0 && lo <= hi && hi.is_finite();
        if !(sane(r.acc_req) && r.acc_req[1] <= 1.0) {
            return Err(invalid("requirements.acc_req must satisfy 0 < lo <= hi <= 1"));
        }
        if !(sane(r.t_max_s) && sane(r.e_max_j)) {
            return Err(invalid("requirement ranges must satisfy 0 < lo <= hi"));
        }
        // the denominator is smallest at the low caps and the high accuracy
        let worst = TaskRequirements {
            acc_req: r.acc_req[1],
            t_max: r.t_max_s[0],
            e_max: r.e_max_j[0],
        };
        self.tlw.requirement_factor(&worst)?;
        self.tasks.validate()?;
        self.meta.validate()?;
        self.learner.validate()?;
        if self.task_model.hidden.contains(&0) {
            return Err(invalid("task_model.hidden sizes must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the whole configuration.
    pub fn config_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serialises"))
    }

    /// SHA-256 over the fields that define the simulated world, excluding
    /// seed, agent, scheme, weighting mode and learner settings.
    pub fn physics_hash(&self) -> String {
        let world = serde_json::json!({
            "devices": self.devices,
            "area_side_m": self.area_side_m,
            "slots_per_episode": self.slots_per_episode,
            "noniid": self.noniid,
            "physics": self.physics,
            "requirements": self.requirements,
            "tlw": self.tlw,
            "vol": self.vol,
            "tasks": self.tasks,
            "task_model": self.task_model,
            "meta": self.meta,
        });
        sha256_hex(world.to_string().as_bytes())
    }

    pub fn channel_model(&self) -> ChannelModel {
        let p = &self.physics;
        ChannelModel {
            path_loss: PathLoss::from_carrier(p.path_loss_exponent, p.carrier_hz, p.reference_distance_m),
            bandwidth: p.bandwidth_hz,
            noise_density_dbm_per_hz: p.noise_dbm_per_hz,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            slots_per_episode: self.slots_per_episode,
            scheme: self.scheme,
            tlw_mode: self.tlw_mode(),
            tlw_weights: self.tlw,
            vol_weights: self.vol,
            gain_log10_bounds: (self.gain_log10_bounds[0], self.gain_log10_bounds[1]),
            meta: self.meta,
        }
    }

    /// Devices, data and initial model for seed `master`. Positions are
    /// uniform over the square centred on the server.
    pub fn build_scenario(&self, master: u64) -> Result<Scenario> {
        self.validate()?;
        let tasks = self
            .tasks
            .generate(self.devices, crate::seed::stream_seed(master, Stream::Data), self.noniid)?;
        let mut topo = stream_rng(master, Stream::Topology);
        let half = self.area_side_m / 2.0;
        let r = &self.requirements;
        let mut draw = |[lo, hi]: [f64; 2]| if lo == hi { lo } else { topo.random_range(lo..=hi) };
        let mut profiles = Vec::with_capacity(self.devices);
        for (id, task) in tasks.iter().enumerate() {
            let position = [draw([-half, half]), draw([-half, half])];
            let requirements = TaskRequirements {
                acc_req: draw(r.acc_req),
                t_max: draw(r.t_max_s),
                e_max: draw(r.e_max_j),
            };
            profiles.push(DeviceProfile {
                id,
                data_size: task.data_size(),
                cycles_per_sample: self.physics.cycles_per_sample,
                f_max: self.physics.f_max_hz,
                p_max: self.physics.p_max_w,
                capacitance_half: self.physics.capacitance_half,
                model_bits: self.physics.model_bits,
                position,
                requirements,
            });
        }
        let mut layers = vec![2];
        layers.extend_from_slice(&self.task_model.hidden);
        layers.push(self.tasks.classes);
        let spec = MlpSpec::new(layers, self.task_model.activation, Activation::Identity)?;
        let init_params = spec.init_params(&mut stream_rng(master, Stream::ModelInit));
        let model = MlpModel::new(spec, LossKind::CrossEntropy);
        self.meta.check_curvature(&model, &init_params, &tasks, 20)?;
        Ok(Scenario {
            profiles,
            tasks,
            channel: self.channel_model(),
            model,
            init_params,
        })
    }
}
