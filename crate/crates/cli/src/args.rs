use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fairtopk_core::datagen::ItemOrder;
use fairtopk_core::marketsim::{CandidatePool, ConsumerOrder};
use fairtopk_core::Objective;

use crate::config::{BenchSolver, DataFiles, Dataset, ExperimentConfig, Method, Rounding};
use crate::error::{CliError, CliResult};
use crate::io::MatrixFormat;

#[derive(Debug, Parser)]
#[command(name = "fairtopk", version, about = "Fairness-constrained top-k allocation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a SimRec dataset and its manifest.
    Gen(GenArgs),
    /// Solve one grid point and write `result.json`.
    Solve(SolveArgs),
    /// Solve every grid point for every seed; CSV plus SVG charts.
    Sweep(SweepArgs),
    /// Solve each grid point and replay it through the purchase simulation.
    Simulate(SimulateArgs),
    /// Time solvers on square instances.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
    pub format: MatrixFormat,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Result path (default `<output>/result.json`).
    #[arg(long)]
    pub result: Option<PathBuf>,
    /// Gradient trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Dump the program in LP format.
    #[arg(long)]
    pub lp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Transaction log CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solvers: Option<Vec<BenchSolver>>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Args, Default)]
pub struct Common {
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, alias = "seed", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,

    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub rounding: Option<Rounding>,
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long)]
    pub node_cap: Option<u64>,
    #[arg(long)]
    pub time_cap: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,

    #[arg(long, value_delimiter = ',', value_parser = parse_objective)]
    pub objective: Option<Vec<Objective>>,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    #[arg(long)]
    pub floor: Option<usize>,

    /// Relevance file; switches the dataset to files.
    #[arg(long)]
    pub relevance: Option<PathBuf>,
    #[arg(long, requires = "relevance")]
    pub groups: Option<PathBuf>,
    #[arg(long, requires = "relevance")]
    pub values: Option<PathBuf>,

    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub num_groups: Option<usize>,
    #[arg(long, value_parser = parse_item_order)]
    pub item_order: Option<ItemOrder>,

    #[arg(long, value_parser = parse_consumer_order)]
    pub order: Option<ConsumerOrder>,
    #[arg(long, value_parser = parse_pool)]
    pub pool: Option<CandidatePool>,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s.to_ascii_lowercase().as_str() {
        "mean" => Ok(Objective::Mean),
        "maxmin" | "max-min" => Ok(Objective::MaxMin),
        "cvar" => Ok(Objective::Cvar),
        _ => Err(format!("unknown objective `{s}` (mean, maxmin, cvar)")),
    }
}

fn parse_item_order(s: &str) -> Result<ItemOrder, String> {
    match s {
        "shared" => Ok(ItemOrder::Shared),
        "per_consumer" | "per-consumer" => Ok(ItemOrder::PerConsumer),
        _ => Err(format!("unknown item order `{s}` (shared, per-consumer)")),
    }
}

fn parse_consumer_order(s: &str) -> Result<ConsumerOrder, String> {
    match s {
        "as_given" | "as-given" => Ok(ConsumerOrder::AsGiven),
        "shuffled" => Ok(ConsumerOrder::Shuffled),
        _ => Err(format!("unknown consumer order `{s}` (as-given, shuffled)")),
    }
}

fn parse_pool(s: &str) -> Result<CandidatePool, String> {
    match s {
        "unsold" => Ok(CandidatePool::Unsold),
        "allocated" => Ok(CandidatePool::Allocated),
        _ => Err(format!("unknown pool `{s}` (unsold, allocated)")),
    }
}

impl Common {
    /// Config file (or defaults) with every given flag applied, validated.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $target:expr) => {
                if let Some(v) = &$flag {
                    $target = v.clone();
                }
            };
        }
        set!(self.output => c.output);
        set!(self.seeds => c.seeds);
        set!(self.method => c.solver.method);
        set!(self.rounding => c.solver.rounding);
        set!(self.samples => c.solver.samples);
        set!(self.node_cap => c.solver.exact.node_cap);
        set!(self.time_cap => c.solver.exact.time_cap_s);
        set!(self.iterations => c.solver.grad.iterations);
        set!(self.objective => c.grid.objective);
        set!(self.k => c.grid.k);
        set!(self.gamma => c.grid.gamma);
        set!(self.alpha => c.grid.alpha);
        set!(self.theta => c.grid.theta);
        set!(self.order => c.market.order);
        set!(self.pool => c.market.pool);
        if self.floor.is_some() {
            c.params.floor_override = self.floor;
        }
        if let Some(rel) = &self.relevance {
            c.dataset = Dataset::Files(DataFiles {
                relevance: rel.clone(),
                groups: self.groups.clone(),
                values: self.values.clone(),
            });
        }
        let simrec_flags =
            self.m.is_some() || self.n.is_some() || self.num_groups.is_some() || self.item_order.is_some();
        if simrec_flags {
            let Dataset::Simrec(s) = &mut c.dataset else {
                return Err(CliError::usage("--m/--n/--num-groups/--item-order need a simrec dataset"));
            };
            set!(self.m => s.m);
            set!(self.n => s.n);
            set!(self.num_groups => s.groups);
            set!(self.item_order => s.item_order);
        }
        if self.threads == Some(0) {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        c.validate()?;
        Ok(c)
    }
}
