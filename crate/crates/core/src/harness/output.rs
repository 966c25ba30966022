//! Run files on disk.
//!
//! | file | contents |
//! |---|---|
//! | `meta.json` | [`RunMeta`] plus the full configuration |
//! | `trace.jsonl` | one [`SlotRecord`] per line |
//! | `episodes.csv` | one [`EpisodeRecord`] per row |
//! | `checkpoint.bin` | learner state after the last completed episode |
//! | `fig3_reward.csv` | `episode,reward,reward_ma20` |
//! | `fig4_accuracy.csv` | `episode,slot,round,accuracy,accuracy_ma20` |
//! | `fig5_vol.csv` | `episode,vol,vol_ma20,vol_cumulative` |
//!
//! Every file is replaced atomically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::io::write_atomic;
use super::run::{moving_average, EpisodeRecord, RunMeta, RunRecord, SMOOTHING_WINDOW};
use crate::error::{Error, Result};

pub const META_FILE: &str = "meta.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

const EPISODES_HEADER: &str = "episode,reward,reward_ma20,vol,vol_ma20,final_accuracy,mean_scheduled,feasible_slots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFile {
    #[serde(flatten)]
    pub meta: RunMeta,
    pub config: ExperimentConfig,
}

/// A named CSV series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotSeries {
    pub file_name: &'static str,
    pub csv: String,
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format {
        what: "run output",
        reason: e.to_string(),
    }
}

pub fn episodes_csv(episodes: &[EpisodeRecord]) -> String {
    let mut s = String::from(EPISODES_HEADER);
    s.push('\n');
    for e in episodes {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            e.episode, e.reward, e.reward_ma, e.vol, e.vol_ma, e.final_accuracy, e.mean_scheduled, e.feasible_slots
        );
    }
    s
}

pub fn parse_episodes_csv(text: &str) -> Result<Vec<EpisodeRecord>> {
    let bad = |line: usize, reason: String| Error::Format {
        what: "episodes.csv",
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some(EPISODES_HEADER) {
        return Err(bad(1, "unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(i + 2, format!("expected 8 fields, got {}", f.len())));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| bad(i + 2, e.to_string()));
            let int = |k: usize| f[k].parse::<usize>().map_err(|e| bad(i + 2, e.to_string()));
            Ok(EpisodeRecord {
                episode: int(0)?,
                reward: num(1)?,
                reward_ma: num(2)?,
                vol: num(3)?,
                vol_ma: num(4)?,
                final_accuracy: num(5)?,
                mean_scheduled: num(6)?,
                feasible_slots: int(7)?,
            })
        })
        .collect()
}

/// The series behind the reward, accuracy and VoL figures.
pub fn export_plotdata(record: &RunRecord) -> Vec<PlotSeries> {
    let eps = &record.episodes;

    let mut fig3 = String::from("episode,reward,reward_ma20\n");
    for e in eps {
        let _ = writeln!(fig3, "{},{},{}", e.episode, e.reward, e.reward_ma);
    }

    // Accuracy after each round, with the mean of the same slot over the
    // trailing window of episodes.
    let slots = record.config.slots_per_episode.max(1);
    let mut fig4 = String::from("episode,slot,round,accuracy,accuracy_ma20\n");
    let per_slot: Vec<Vec<f64>> = (0..slots)
        .map(|k| {
            let xs: Vec<f64> = record.slots.iter().filter(|s| s.slot == k).map(|s| s.mean_accuracy).collect();
            moving_average(&xs, SMOOTHING_WINDOW)
        })
        .collect();
    for s in &record.slots {
        let _ = writeln!(
            fig4,
            "{},{},{},{},{}",
            s.episode,
            s.slot,
            s.episode * slots + s.slot,
            s.mean_accuracy,
            per_slot[s.slot][s.episode]
        );
    }

    let mut fig5 = String::from("episode,vol,vol_ma20,vol_cumulative\n");
    let mut total = 0.0;
    for e in eps {
        total += e.vol;
        let _ = writeln!(fig5, "{},{},{},{}", e.episode, e.vol, e.vol_ma, total);
    }

    vec![
        PlotSeries {
            file_name: "fig3_reward.csv",
            csv: fig3,
        },
        PlotSeries {
            file_name: "fig4_accuracy.csv",
            csv: fig4,
        },
        PlotSeries {
            file_name: "fig5_vol.csv",
            csv: fig5,
        },
    ]
}

/// Writes every run file into `dir`.
pub fn write_run(record: &RunRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = MetaFile {
        meta: record.meta.clone(),
        config: record.config.clone(),
    };
    let mut meta_json = serde_json::to_string_pretty(&meta).map_err(json_err)?;
    meta_json.push('\n');
    write_atomic(&dir.join(META_FILE), meta_json.as_bytes())?;

    let mut trace = String::new();
    for s in &record.slots {
        trace.push_str(&serde_json::to_string(s).map_err(json_err)?);
        trace.push('\n');
    }
    write_atomic(&dir.join(TRACE_FILE), trace.as_bytes())?;
    write_atomic(&dir.join(EPISODES_FILE), episodes_csv(&record.episodes).as_bytes())?;
    if let Some(bytes) = &record.checkpoint {
        write_atomic(&dir.join(CHECKPOINT_FILE), bytes)?;
    }
    for series in export_plotdata(record) {
        write_atomic(&dir.join(series.file_name), series.csv.as_bytes())?;
    }
    Ok(())
}

/// Metadata and episode summaries of a run directory.
pub fn read_summary(dir: &Path) -> Result<(MetaFile, Vec<EpisodeRecord>)> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let meta: MetaFile = serde_json::from_str(&read(META_FILE)?).map_err(json_err)?;
    let episodes = parse_episodes_csv(&read(EPISODES_FILE)?)?;
    Ok((meta, episodes))
}
