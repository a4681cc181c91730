use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qreservoir::pipeline::{Mode, SweepConfig};
use qreservoir::PulseConvention;

#[derive(Debug, Parser)]
#[command(
    name = "qreservoir",
    version,
    about = "Quantum-reservoir phase detection for the extended SSH chain"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground states, invariants and reservoir features over the grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        reservoir: ReservoirArgs,
    },
    /// Record feature dynamics over every cycle of the reservoir.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L")]
        n_sites: Option<usize>,
        /// Evolve the ground state at this delta (needs --jp); the polarized
        /// product state otherwise.
        #[arg(long, requires = "jp")]
        delta: Option<f64>,
        #[arg(long, requires = "delta")]
        jp: Option<f64>,
        #[command(flatten)]
        reservoir: ReservoirArgs,
        /// Output CSV; a JSON sidecar is written next to it.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the partial-reflection invariant as `delta,jp,value,label` CSV.
    Mbti {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Embed and cluster the features of a previous sweep.
    Learn {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Comparison table, plots and provenance from sweep and learn outputs.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep, learn and report in one run.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        reservoir: ReservoirArgs,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long)]
        learner_seed: Option<u64>,
    },
    /// Brute-force cross-checks of every numerical kernel.
    Selftest,
    /// Print the effective configuration as JSON.
    Config {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        reservoir: ReservoirArgs,
        #[command(flatten)]
        learn: LearnArgs,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep ground-state dumps here and reuse them.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long = "L")]
    pub n_sites: Option<usize>,
    /// Comma-separated anisotropy values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub delta: Option<Vec<f64>>,
    /// Single J' value; overrides the range flags.
    #[arg(long, conflicts_with_all = ["jp_min", "jp_max"])]
    pub jp: Option<f64>,
    #[arg(long)]
    pub jp_min: Option<f64>,
    #[arg(long)]
    pub jp_max: Option<f64>,
    #[arg(long)]
    pub jp_step: Option<f64>,
    #[arg(long)]
    pub eps_pin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReservoirArgs {
    /// IDENTITY, THERMAL or DTC.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Pulse parameter in units of pi.
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Disorder seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// HALF_ANGLE or LITERAL.
    #[arg(long)]
    pub convention: Option<PulseConvention>,
    /// Shots per state; 0 for exact expectations.
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub zzz: bool,
    /// Average features over all cycles instead of the final one.
    #[arg(long)]
    pub cycle_average: bool,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Fixed component count instead of BIC selection.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub pooled: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    pub fn load(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => SweepConfig::default(),
        };
        set(&mut cfg.output_dir, self.out.clone());
        if self.cache.is_some() {
            cfg.cache_dir = self.cache.clone();
        }
        Ok(cfg)
    }
}

impl ModelArgs {
    pub fn apply(&self, cfg: &mut SweepConfig) {
        set(&mut cfg.n_sites, self.n_sites);
        set(&mut cfg.delta_list, self.delta.clone());
        set(&mut cfg.jp_min, self.jp_min);
        set(&mut cfg.jp_max, self.jp_max);
        set(&mut cfg.jp_step, self.jp_step);
        if let Some(jp) = self.jp {
            cfg.jp_min = jp;
            cfg.jp_max = jp;
        }
        set(&mut cfg.eps_pin, self.eps_pin);
    }
}

impl ReservoirArgs {
    pub fn apply(&self, cfg: &mut SweepConfig) {
        set(&mut cfg.mode, self.mode);
        if let Some(g) = self.g {
            cfg.g = Some(g * PI);
        }
        if self.depth.is_some() {
            cfg.depth = self.depth;
        }
        set(&mut cfg.reservoir_seed, self.seed);
        set(&mut cfg.convention, self.convention);
        set(&mut cfg.shots, self.shots);
        cfg.include_zzz |= self.zzz;
        cfg.cycle_average |= self.cycle_average;
    }
}

impl LearnArgs {
    pub fn apply(&self, cfg: &mut SweepConfig) {
        set(&mut cfg.perplexity, self.perplexity);
        set(&mut cfg.iterations, self.iters);
        set(&mut cfg.learning_rate, self.learning_rate);
        if self.k.is_some() {
            cfg.k = self.k;
        }
        set(&mut cfg.k_max, self.kmax);
        cfg.pooled |= self.pooled;
    }
}
