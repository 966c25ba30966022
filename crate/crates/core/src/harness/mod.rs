//! Experiment configuration, the run loop, run files and comparisons.

pub mod compare;
pub mod config;
pub mod io;
pub mod output;
pub mod run;

pub use compare::{compare_dirs, compare_runs, Comparison, Metric, RunSummary, Spread};
pub use config::{AgentKind, ExperimentConfig, Physics, RequirementRanges, TaskModelConfig};
pub use output::{export_plotdata, read_summary, write_run, PlotSeries};
pub use run::{
    build_controller, build_env, moving_average, run_experiment, run_in_memory, EpisodeRecord, RunMeta, RunRecord,
    SlotRecord, SMOOTHING_WINDOW,
};
