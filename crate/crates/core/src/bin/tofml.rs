use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tofml::harness::{compare_dirs, run_experiment, AgentKind, ExperimentConfig};
use tofml::metrics::TlwMode;
use tofml::radio::AccessScheme;
use tofml::Error;

/// Joint device scheduling and resource allocation for federated
/// meta-learning.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its files.
    Run {
        /// TOML configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        agent: Option<AgentArg>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long, value_enum)]
        tlw_mode: Option<ModeArg>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare final-window performance of run directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Pdqn,
    Ddpg,
    Rra,
    Ew,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Noma,
    Oma,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tlw,
    Equal,
}

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => EXIT_CONFIG,
        Error::NumericAbort { .. } => EXIT_NUMERIC,
        _ => EXIT_OTHER,
    }
}

fn run(cli: Cli) -> tofml::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            agent,
            scheme,
            tlw_mode,
            episodes,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(a) = agent {
                cfg.agent = match a {
                    AgentArg::Pdqn => AgentKind::Pdqn,
                    AgentArg::Ddpg => AgentKind::Ddpg,
                    AgentArg::Rra => AgentKind::Rra,
                    AgentArg::Ew => AgentKind::Ew,
                };
            }
            if let Some(s) = scheme {
                cfg.scheme = match s {
                    SchemeArg::Noma => AccessScheme::Noma,
                    SchemeArg::Oma => AccessScheme::Oma,
                };
            }
            if let Some(m) = tlw_mode {
                cfg.tlw_mode = Some(match m {
                    ModeArg::Tlw => TlwMode::Tlw,
                    ModeArg::Equal => TlwMode::EqualWeight,
                });
            }
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            cfg.validate()?;
            let record = run_experiment(&cfg, Some(&out))?;
            let last = record.episodes.last().expect("at least one episode");
            println!(
                "{} seed {}: {} episodes, final reward_ma20 {:.6}, vol_ma20 {:.6}, accuracy {:.4}",
                record.meta.arm,
                cfg.seed,
                record.episodes.len(),
                last.reward_ma,
                last.vol_ma,
                last.final_accuracy
            );
        }
        Command::Compare { dirs } => print!("{}", compare_dirs(&dirs)?),
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
