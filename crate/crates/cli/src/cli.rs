use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use poselift::corrupt::SplitRole;
use poselift::net::GradCheckOptions;
use poselift::Error;

use crate::commands;
use crate::config::RunConfig;
use crate::pipeline::Grid;
use crate::preset::{Preset, DEFAULT_TAGN};

#[derive(Debug, Parser)]
#[command(name = "poselift", version, about = "Corruption-robust temporal 2D-to-3D pose lifting")]
pub struct Cli {
    /// JSON run configuration; absent fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured top-level seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-sequence parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Train and evaluate in double precision.
    #[arg(long = "f64", global = true)]
    pub use_f64: bool,
    /// Overrides the configured run directory.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Train,
    Test,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    /// TAGN joint ratio p by temporal ratio k at fixed sigma.
    Pk,
    /// Receptive fields 1, 9, 27, 81 for each preset.
    Rf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize clean train and test bundles.
    Synth,
    /// Build corrupted train and/or test splits from the clean bundles.
    Corrupt {
        #[arg(long, value_enum, default_value = "both")]
        role: RoleArg,
        /// Leave the cropping operator out of both roles.
        #[arg(long)]
        skip_cropping: bool,
    },
    /// Train one preset and write a checkpoint plus logs.
    Train {
        #[arg(long)]
        preset: Option<Preset>,
    },
    /// Evaluate the checkpoint on the corrupted test split.
    Eval {
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        tau: Option<f64>,
        /// Also write per-joint 2D error histograms with this many bins.
        #[arg(long)]
        histograms: Option<usize>,
    },
    /// Train and evaluate a grid of settings.
    Sweep {
        #[arg(long, value_enum)]
        grid: GridArg,
        /// TAGN sigma for the pk grid.
        #[arg(long)]
        sigma: Option<f64>,
        /// Presets for the rf grid; repeatable.
        #[arg(long = "preset")]
        presets: Vec<Preset>,
    },
    /// Finite-difference check of every layer's gradients.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// `case/param` to corrupt deliberately.
        #[arg(long, hide = true)]
        perturb: Option<String>,
    },
    /// Collect evaluated runs into one table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

/// 0 success, 2 configuration or validation, 3 numerical, 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Numerical(_) | Error::Degenerate(_) => 3,
                Error::Io(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.run_dir {
        cfg.run_dir = dir.clone();
    }
    match &cli.command {
        Command::Corrupt { skip_cropping: true, .. } => cfg.split.skip_cropping = true,
        Command::Train { preset: Some(p) } => cfg.preset = Some(p.clone()),
        Command::Eval { preset, tau, histograms } => {
            if let Some(p) = preset {
                cfg.preset = Some(p.clone());
            }
            if let Some(t) = tau {
                cfg.eval.tau = *t;
            }
            if let Some(b) = histograms {
                cfg.eval.histogram_bins = *b;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be at least 1".into()).into());
        }
        // A pool may already exist when called in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Corrupt { role, .. } => {
            let roles: &[SplitRole] = match role {
                RoleArg::Train => &[SplitRole::Train],
                RoleArg::Test => &[SplitRole::Test],
                RoleArg::Both => &[SplitRole::Train, SplitRole::Test],
            };
            commands::corrupt(&cfg, roles)
        }
        Command::Train { .. } => commands::train(&cfg, cli.use_f64),
        Command::Eval { .. } => commands::eval(&cfg, cli.use_f64),
        Command::Sweep { grid, sigma, presets } => {
            let grid = match grid {
                GridArg::Pk => {
                    let sigma = sigma.or(cfg.tagn.as_ref().map(|t| t.sigma)).unwrap_or(DEFAULT_TAGN.0);
                    Grid::joint_temporal(sigma)
                }
                GridArg::Rf => {
                    let presets = if presets.is_empty() {
                        vec![
                            Preset::Clean,
                            "clean+tagn".parse().map_err(anyhow::Error::msg)?,
                            Preset::Corrupt,
                            "corrupt+caconv".parse().map_err(anyhow::Error::msg)?,
                        ]
                    } else {
                        presets.clone()
                    };
                    Grid::receptive_field(presets)
                }
            };
            commands::sweep(&cfg, &grid, cli.use_f64)
        }
        Command::Gradcheck { seeds, perturb } => {
            commands::gradcheck(&cfg, &GradCheckOptions { seeds: *seeds, perturb: perturb.clone() })
        }
        Command::Report { runs } => commands::report(&cfg, runs),
    }
}
