//! Final-window comparison of runs grouped into arms.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::output::read_summary;
use super::run::{EpisodeRecord, RunMeta, RunRecord, SMOOTHING_WINDOW};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Reward,
    Vol,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Reward, Metric::Vol, Metric::Accuracy];

    fn of(self, e: &EpisodeRecord) -> f64 {
        match self {
            Metric::Reward => e.reward,
            Metric::Vol => e.vol,
            Metric::Accuracy => e.final_accuracy,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Reward => "reward",
            Metric::Vol => "vol",
            Metric::Accuracy => "accuracy",
        }
    }
}

/// What a comparison needs from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub meta: RunMeta,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let (file, episodes) = read_summary(dir)?;
        Ok(Self {
            meta: file.meta,
            episodes,
        })
    }
}

impl From<&RunRecord> for RunSummary {
    fn from(r: &RunRecord) -> Self {
        Self {
            meta: r.meta.clone(),
            episodes: r.episodes.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinalWindow {
    pub reward: f64,
    pub vol: f64,
    pub accuracy: f64,
}

impl FinalWindow {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Reward => self.reward,
            Metric::Vol => self.vol,
            Metric::Accuracy => self.accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    /// Order statistics; the median of an even count is the midpoint.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Self {
            min: v[0],
            median,
            max: v[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub arm: String,
    pub seed: u64,
    pub window: FinalWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmResult {
    pub arm: String,
    pub runs: usize,
    pub reward: Spread,
    pub vol: Spread,
    pub accuracy: Spread,
}

impl ArmResult {
    pub fn spread(&self, m: Metric) -> Spread {
        match m {
            Metric::Reward => self.reward,
            Metric::Vol => self.vol,
            Metric::Accuracy => self.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Last episode index shared by every run, plus one.
    pub common_episodes: usize,
    pub window: usize,
    pub runs: Vec<RunResult>,
    /// Sorted by arm label.
    pub arms: Vec<ArmResult>,
}

/// `a ≻ b` or a tie between neighbouring arms of an ordering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranked {
    pub arm: String,
    pub median: f64,
    /// True when this arm's median equals the previous one's.
    pub tied_with_previous: bool,
}

/// Mean of `metric` over the last `window` of the first `episodes` episodes.
pub fn final_window_mean(episodes: &[EpisodeRecord], common: usize, window: usize, metric: Metric) -> f64 {
    let end = common.min(episodes.len());
    let start = end.saturating_sub(window);
    let xs = &episodes[start..end];
    xs.iter().map(|e| metric.of(e)).sum::<f64>() / xs.len() as f64
}

/// Compares runs over the final `window` episodes of their common range.
///
/// Runs must agree on device count and on the physics hash.
pub fn compare_runs(runs: &[RunSummary], window: usize) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("comparison needs at least two runs".into()));
    }
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let first = &runs[0].meta;
    for r in &runs[1..] {
        if r.meta.devices != first.devices {
            return Err(Error::Mismatch(format!(
                "device counts differ: {} has {}, {} has {}",
                first.arm, first.devices, r.meta.arm, r.meta.devices
            )));
        }
        if r.meta.physics_hash != first.physics_hash {
            return Err(Error::Mismatch(format!(
                "physics differs between {} (seed {}) and {} (seed {})",
                first.arm, first.seed, r.meta.arm, r.meta.seed
            )));
        }
    }
    let common = runs.iter().map(|r| r.episodes.len()).min().unwrap_or(0);
    if common == 0 {
        return Err(Error::InvalidArgument("a run has no completed episodes".into()));
    }
    let results: Vec<RunResult> = runs
        .iter()
        .map(|r| {
            let w = |m| final_window_mean(&r.episodes, common, window, m);
            RunResult {
                arm: r.meta.arm.clone(),
                seed: r.meta.seed,
                window: FinalWindow {
                    reward: w(Metric::Reward),
                    vol: w(Metric::Vol),
                    accuracy: w(Metric::Accuracy),
                },
            }
        })
        .collect();
    let mut grouped: BTreeMap<&str, Vec<&FinalWindow>> = BTreeMap::new();
    for r in &results {
        grouped.entry(&r.arm).or_default().push(&r.window);
    }
    let arms = grouped
        .into_iter()
        .map(|(arm, ws)| {
            let s = |m: Metric| Spread::of(&ws.iter().map(|w| w.get(m)).collect::<Vec<_>>());
            ArmResult {
                arm: arm.to_string(),
                runs: ws.len(),
                reward: s(Metric::Reward),
                vol: s(Metric::Vol),
                accuracy: s(Metric::Accuracy),
            }
        })
        .collect();
    Ok(Comparison {
        common_episodes: common,
        window: window.min(common),
        runs: results,
        arms,
    })
}

/// Loads run directories and compares them with the default window.
pub fn compare_dirs<P: AsRef<Path>>(dirs: &[P]) -> Result<Comparison> {
    let runs = dirs.iter().map(|d| RunSummary::load(d.as_ref())).collect::<Result<Vec<_>>>()?;
    compare_runs(&runs, SMOOTHING_WINDOW)
}

impl Comparison {
    /// Arms from best to worst by median of `metric`; ties keep label order.
    pub fn ordering(&self, metric: Metric) -> Vec<Ranked> {
        let mut arms: Vec<(&str, f64)> = self.arms.iter().map(|a| (a.arm.as_str(), a.spread(metric).median)).collect();
        arms.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut out: Vec<Ranked> = Vec::with_capacity(arms.len());
        for (arm, median) in arms {
            let tied_with_previous = out.last().is_some_and(|p| p.median == median);
            out.push(Ranked {
                arm: arm.to_string(),
                median,
                tied_with_previous,
            });
        }
        out
    }

    pub fn arm(&self, label: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm == label)
    }

    /// `metric` per seed for each arm, for paired comparisons.
    pub fn per_seed(&self, metric: Metric) -> BTreeMap<u64, BTreeMap<String, f64>> {
        let mut out: BTreeMap<u64, BTreeMap<String, f64>> = BTreeMap::new();
        for r in &self.runs {
            out.entry(r.seed).or_default().insert(r.arm.clone(), r.window.get(metric));
        }
        out
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "final {} of {} common episodes",
            self.window, self.common_episodes
        )?;
        for metric in Metric::ALL {
            writeln!(f, "\n[{}]", metric.as_str())?;
            for a in &self.arms {
                let s = a.spread(metric);
                writeln!(
                    f,
                    "  {:<20} n={} min={:.6} median={:.6} max={:.6}",
                    a.arm, a.runs, s.min, s.median, s.max
                )?;
            }
            for (seed, arms) in self.per_seed(metric) {
                let cells: Vec<String> = arms.iter().map(|(a, v)| format!("{a}={v:.6}")).collect();
                writeln!(f, "  seed {seed}: {}", cells.join(" "))?;
            }
            let order = self.ordering(metric);
            let mut line = String::new();
            for (i, r) in order.iter().enumerate() {
                if i > 0 {
                    line.push_str(if r.tied_with_previous { " ~ " } else { " > " });
                }
                line.push_str(&r.arm);
            }
            writeln!(f, "  ordering: {line}")?;
        }
        Ok(())
    }
}
