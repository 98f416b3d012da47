//! Experiment configuration file.
//!
//! A single JSON document; every field has a default, so `{}` is a valid
//! config. Command-line flags are applied on top after loading. A manifest
//! written by `gen` is accepted too (its `config` member is used).

use std::fs;
use std::path::{Path, PathBuf};

use fairtopk_core::datagen::SimRecConfig;
use fairtopk_core::exact::ExactLimits;
use fairtopk_core::grad::GradConfig;
use fairtopk_core::marketsim::{CandidatePool, ConsumerOrder};
use fairtopk_core::{Normalization, Objective};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    /// Producer values when no values file is given.
    pub values: ValueSpec,
    pub solver: SolverConfig,
    pub params: ParamsConfig,
    pub grid: Grid,
    /// Master seeds. SimRec datasets are regenerated with each seed.
    pub seeds: Vec<u64>,
    pub market: MarketConfig,
    pub bench: BenchConfig,
    /// Not part of the config hash.
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: Dataset::default(),
            values: ValueSpec::InversePopularity,
            solver: SolverConfig::default(),
            params: ParamsConfig::default(),
            grid: Grid::default(),
            seeds: vec![0],
            market: MarketConfig::default(),
            bench: BenchConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// The config's own seed is replaced by the run seed.
    Simrec(SimRecConfig),
    Files(DataFiles),
}

impl Default for Dataset {
    fn default() -> Self {
        Dataset::Simrec(SimRecConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    /// `.csv`, or raw little-endian f32 with a `.json` header alongside.
    pub relevance: PathBuf,
    pub groups: Option<PathBuf>,
    pub values: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSpec {
    Uniform,
    /// Inverse popularity under the unconstrained top-k of the point's `k`.
    InversePopularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Lp,
    Auglag,
    Scgrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Topk,
    Hard,
    Prob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Ignored by the exact solver.
    pub rounding: Rounding,
    pub samples: u32,
    pub exact: ExactLimits,
    pub grad: GradConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Lp,
            rounding: Rounding::Topk,
            samples: fairtopk_core::lp::DEFAULT_ROUNDING_SAMPLES,
            exact: ExactLimits { node_cap: 10_000, time_cap_s: 120.0, gap_tolerance: 1e-6 },
            grad: GradConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub normalization: Option<Normalization>,
    pub floor_override: Option<usize>,
}

/// Parameter grids. `solve` uses the first entry of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub objective: Vec<Objective>,
    pub k: Vec<usize>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self { objective: vec![Objective::Mean], k: vec![10], gamma: vec![0.5], alpha: vec![0.95], theta: vec![0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub objective: Objective,
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl Grid {
    /// Cartesian product, objective outermost and theta innermost.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &objective in &self.objective {
            for &k in &self.k {
                for &gamma in &self.gamma {
                    for &alpha in &self.alpha {
                        for &theta in &self.theta {
                            out.push(GridPoint { index: out.len(), objective, k, gamma, alpha, theta });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn first(&self) -> GridPoint {
        self.points().into_iter().next().expect("grids validated nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub order: ConsumerOrder,
    pub pool: CandidatePool,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self { order: ConsumerOrder::Shuffled, pool: CandidatePool::Unsold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BenchSolver {
    Exact,
    #[serde(rename = "lp+topk")]
    #[value(name = "lp+topk")]
    LpTopk,
    Auglag,
    Scgrad,
}

impl BenchSolver {
    pub fn name(self) -> &'static str {
        match self {
            BenchSolver::Exact => "exact",
            BenchSolver::LpTopk => "lp+topk",
            BenchSolver::Auglag => "auglag",
            BenchSolver::Scgrad => "scgrad",
        }
    }
}

/// Square SimRec instances solved at gamma 0.5, alpha 0.95, k 10 under CVaR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub solvers: Vec<BenchSolver>,
    pub repeats: usize,
    pub exact: ExactLimits,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 200],
            solvers: vec![BenchSolver::Exact, BenchSolver::LpTopk, BenchSolver::Auglag, BenchSolver::Scgrad],
            repeats: 3,
            exact: ExactLimits { node_cap: 2_000, time_cap_s: 60.0, gap_tolerance: 1e-6 },
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if value.get("config_hash").is_some() && value.get("files").is_some() {
            if let Some(inner) = value.get_mut("config").map(serde_json::Value::take) {
                value = inner;
            }
        }
        serde_json::from_value(value).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        let g = &self.grid;
        for (name, empty) in [
            ("objective", g.objective.is_empty()),
            ("k", g.k.is_empty()),
            ("gamma", g.gamma.is_empty()),
            ("alpha", g.alpha.is_empty()),
            ("theta", g.theta.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(CliError::usage(format!("grid `{name}` is empty")));
            }
        }
        if g.k.contains(&0) {
            return Err(CliError::usage("k must be at least 1"));
        }
        check_range("gamma", &g.gamma, |x| (0.0..=1.0).contains(&x))?;
        check_range("alpha", &g.alpha, |x| (0.0..1.0).contains(&x))?;
        check_range("theta", &g.theta, |x| (0.0..=1.0).contains(&x))?;
        if self.solver.samples == 0 {
            return Err(CliError::usage("samples must be at least 1"));
        }
        self.solver.grad.validate()?;
        match &self.dataset {
            Dataset::Simrec(c) => c.validate()?,
            Dataset::Files(f) => {
                for p in std::iter::once(&f.relevance).chain(&f.groups).chain(&f.values) {
                    if !p.exists() {
                        return Err(CliError::usage(format!("{} does not exist", p.display())));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn validate_bench(&self) -> CliResult<()> {
        let b = &self.bench;
        if b.sizes.is_empty() || b.solvers.is_empty() || b.repeats == 0 {
            return Err(CliError::usage("bench needs sizes, solvers and at least one repeat"));
        }
        if b.sizes.iter().any(|&s| s < 2) {
            return Err(CliError::usage("bench sizes must be at least 2"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON with the output path removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        sha256_hex(json.as_bytes())
    }
}

fn check_range(name: &str, xs: &[f64], ok: impl Fn(f64) -> bool) -> CliResult<()> {
    match xs.iter().find(|&&x| !ok(x)) {
        Some(x) => Err(CliError::usage(format!("{name}={x} is out of range"))),
        None => Ok(()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
