//! The experiment loop and its in-memory record.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AgentKind, ExperimentConfig};
use super::output::write_run;
use crate::agents::{ActionBounds, Controller, Ddpg, LearnerSeeds, Pdqn, RandomAllocation, Rotation, Transition};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::seed::{episode_seed, stream_seed, Stream};

/// Trailing window of the moving averages, in episodes.
pub const SMOOTHING_WINDOW: usize = 20;

/// One environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub episode: usize,
    pub slot: usize,
    pub reward: f64,
    pub objective: f64,
    pub feasible: bool,
    pub mask: Vec<bool>,
    pub power: Vec<f64>,
    pub freq: Vec<f64>,
    pub round_time: f64,
    pub energy: Vec<f64>,
    pub accuracy: Vec<Option<f64>>,
    pub mean_accuracy: f64,
    pub v_acc: Vec<f64>,
    pub v_time: Vec<f64>,
    pub v_energy: Vec<f64>,
    pub weights: Vec<f64>,
    pub td_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Sum of clipped rewards.
    pub reward: f64,
    pub reward_ma: f64,
    /// Sum of the unclipped weighted value of learning.
    pub vol: f64,
    pub vol_ma: f64,
    /// Mean personalised accuracy after the episode's last round.
    pub final_accuracy: f64,
    pub mean_scheduled: f64,
    pub feasible_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub seed: u64,
    pub arm: String,
    pub agent: AgentKind,
    pub devices: usize,
    pub episodes: usize,
    pub slots_per_episode: usize,
    pub config_hash: String,
    pub physics_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub config: ExperimentConfig,
    pub slots: Vec<SlotRecord>,
    pub episodes: Vec<EpisodeRecord>,
    /// Learner state after the last completed episode.
    pub checkpoint: Option<Vec<u8>>,
}

/// Mean of the trailing `window` entries ending at each position.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn build_controller(cfg: &ExperimentConfig, bounds: ActionBounds) -> Result<Box<dyn Controller>> {
    let seeds = LearnerSeeds::from_master(cfg.seed);
    Ok(match cfg.agent {
        AgentKind::Pdqn => Box::new(Pdqn::new(cfg.learner.clone(), bounds, seeds)?),
        AgentKind::Ddpg => Box::new(Ddpg::new(cfg.learner.clone(), bounds, seeds)?),
        AgentKind::Rra => Box::new(RandomAllocation::new(bounds, stream_seed(cfg.seed, Stream::Exploration))),
        AgentKind::Ew => Box::new(Rotation::new(bounds, cfg.rotation_window)?),
    })
}

pub fn build_env(cfg: &ExperimentConfig) -> Result<Env> {
    Env::new(cfg.env_config(), cfg.build_scenario(cfg.seed)?)
}

fn meta_of(cfg: &ExperimentConfig) -> RunMeta {
    RunMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        arm: cfg.arm_label(),
        agent: cfg.agent,
        devices: cfg.devices,
        episodes: cfg.episodes,
        slots_per_episode: cfg.slots_per_episode,
        config_hash: cfg.config_hash(),
        physics_hash: cfg.physics_hash(),
    }
}

fn summarise(episode: usize, slots: &[SlotRecord], history: &[EpisodeRecord]) -> EpisodeRecord {
    let reward: f64 = slots.iter().map(|s| s.reward).sum();
    let vol: f64 = slots.iter().map(|s| s.objective).sum();
    let window = |f: fn(&EpisodeRecord) -> f64, current: f64| {
        let start = history.len().saturating_sub(SMOOTHING_WINDOW - 1);
        let past = &history[start..];
        (past.iter().map(f).sum::<f64>() + current) / (past.len() + 1) as f64
    };
    EpisodeRecord {
        episode,
        reward,
        reward_ma: window(|e| e.reward, reward),
        vol,
        vol_ma: window(|e| e.vol, vol),
        final_accuracy: slots.last().map_or(0.0, |s| s.mean_accuracy),
        mean_scheduled: slots
            .iter()
            .map(|s| s.mask.iter().filter(|&&z| z).count() as f64)
            .sum::<f64>()
            / slots.len().max(1) as f64,
        feasible_slots: slots.iter().filter(|s| s.feasible).count(),
    }
}

fn numeric_abort(episode: usize, slot: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::NumericAbort {
            episode,
            slot,
            reason: format!("non-finite {what}"),
        },
        other => other,
    }
}

/// Runs every episode in memory.
///
/// A non-finite value anywhere aborts with [`Error::NumericAbort`]; the
/// partial record, including the last end-of-episode checkpoint, is handed
/// to `on_abort` first.
pub fn run_in_memory(cfg: &ExperimentConfig, mut on_abort: impl FnMut(&RunRecord)) -> Result<RunRecord> {
    cfg.validate()?;
    let mut env = build_env(cfg)?;
    let mut agent = build_controller(cfg, ActionBounds::from_profiles(env.profiles()))?;
    let mut record = RunRecord {
        meta: meta_of(cfg),
        config: cfg.clone(),
        slots: Vec::with_capacity(cfg.episodes * cfg.slots_per_episode),
        episodes: Vec::with_capacity(cfg.episodes),
        checkpoint: agent.checkpoint(),
    };
    for episode in 0..cfg.episodes {
        let first_slot = record.slots.len();
        match run_episode(cfg, episode, &mut env, agent.as_mut(), &mut record.slots) {
            Ok(()) => {}
            Err(e) => {
                let e = numeric_abort(episode, record.slots.len() - first_slot, e);
                if matches!(e, Error::NumericAbort { .. }) {
                    on_abort(&record);
                }
                return Err(e);
            }
        }
        let summary = summarise(episode, &record.slots[first_slot..], &record.episodes);
        record.episodes.push(summary);
        record.checkpoint = agent.checkpoint();
    }
    Ok(record)
}

fn run_episode(
    cfg: &ExperimentConfig,
    episode: usize,
    env: &mut Env,
    agent: &mut dyn Controller,
    slots: &mut Vec<SlotRecord>,
) -> Result<()> {
    agent.begin_episode(episode, cfg.episodes);
    let mut state = env.reset(episode_seed(cfg.seed, Stream::Fading, episode as u64))?;
    for slot in 0..cfg.slots_per_episode {
        let action = agent.act(&state, true)?;
        let weights = state.weights.clone();
        let out = env.step(&action.decision)?;
        if !out.reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        let stats = agent.observe(Transition {
            state: state.encoded.clone(),
            cont_action: action.cont,
            disc_action: action.disc,
            reward: out.reward,
            next_state: out.next_state.encoded.clone(),
            terminal: out.done,
        })?;
        if let Some(s) = stats {
            if !s.td_loss.is_finite() || !s.actor_value.is_finite() {
                return Err(Error::NonFinite("learner loss"));
            }
        }
        let info = out.info;
        let n = info.vols.len();
        slots.push(SlotRecord {
            episode,
            slot,
            reward: out.reward,
            objective: info.objective,
            feasible: info.feasible,
            round_time: info.costs.round_time,
            energy: (0..n).map(|k| info.costs.energy(k)).collect(),
            accuracy: info.accuracy,
            mean_accuracy: info.mean_accuracy,
            v_acc: info.vols.iter().map(|v| v.v_acc).collect(),
            v_time: info.vols.iter().map(|v| v.v_time).collect(),
            v_energy: info.vols.iter().map(|v| v.v_energy).collect(),
            mask: info.decision.mask,
            power: info.decision.power,
            freq: info.decision.freq,
            weights,
            td_loss: stats.map(|s| s.td_loss),
        });
        state = out.next_state;
    }
    Ok(())
}

/// Runs the experiment and, when `out_dir` is given, writes its files there.
/// On a numeric abort the partial outputs and the last-good checkpoint are
/// still written.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunRecord> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut write_err = None;
    let result = run_in_memory(cfg, |partial| {
        if let Some(dir) = out_dir {
            write_err = write_run(partial, dir).err();
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let record = result?;
    if let Some(dir) = out_dir {
        write_run(&record, dir)?;
    }
    Ok(record)
}
