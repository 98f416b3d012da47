//! Shared per-point solving used by every subcommand.

use std::time::Instant;

use fairtopk_core::datagen::{gen_simrec, gen_values, ValueMode};
use fairtopk_core::exact::solve_exact;
use fairtopk_core::grad::{solve_auglag, solve_scgrad, GradTrace};
use fairtopk_core::lp::{round_hard, round_prob, round_topk, solve_lp, FractionalSolution};
use fairtopk_core::metrics::{assess, assess_samples, SampleSpread};
use fairtopk_core::program::{build, Integrality};
use fairtopk_core::{
    Error as CoreError, FairnessParams, GroupPartition, Problem, ProducerValues, RelevanceMatrix, SolveResult,
    SolverStats,
};

use crate::config::{Dataset, ExperimentConfig, GridPoint, Method, Rounding, SolverConfig, ValueSpec};
use crate::error::CliResult;
use crate::io;

/// Dataset shared by every grid point of one seed.
#[derive(Debug, Clone)]
pub struct Instance {
    pub rho: RelevanceMatrix,
    pub groups: GroupPartition,
    /// From a values file; otherwise derived per point.
    pub values: Option<ProducerValues>,
}

pub fn load_instance(config: &ExperimentConfig, seed: u64) -> CliResult<Instance> {
    match &config.dataset {
        Dataset::Simrec(c) => {
            let (rho, groups) = gen_simrec(&fairtopk_core::datagen::SimRecConfig { seed, ..c.clone() })?;
            Ok(Instance { rho, groups, values: None })
        }
        Dataset::Files(f) => {
            let rho = io::read_relevance(&f.relevance)?;
            let groups = match &f.groups {
                Some(p) => io::read_groups(p, rho.m())?,
                None => GroupPartition::single(rho.m()),
            };
            let values = f.values.as_deref().map(|p| io::read_values(p, rho.n())).transpose()?;
            Ok(Instance { rho, groups, values })
        }
    }
}

pub fn values_for(instance: &Instance, spec: ValueSpec, k: usize) -> Result<ProducerValues, CoreError> {
    if let Some(v) = &instance.values {
        return Ok(v.clone());
    }
    match spec {
        ValueSpec::Uniform => Ok(ProducerValues::uniform(instance.rho.n())),
        ValueSpec::InversePopularity => gen_values(&instance.rho, k, ValueMode::InversePopularity),
    }
}

pub fn problem_for(config: &ExperimentConfig, instance: &Instance, point: &GridPoint) -> Result<Problem, CoreError> {
    let mut params = FairnessParams::new(point.k, point.objective)
        .with_gamma(point.gamma)
        .with_alpha(point.alpha)
        .with_theta(point.theta);
    params.normalization = config.params.normalization;
    params.floor_override = config.params.floor_override;
    params.validate(instance.rho.n())?;
    let values = values_for(instance, config.values, point.k)?;
    Problem::new(instance.rho.clone(), instance.groups.clone(), values, params)
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: SolveResult,
    /// Present for probabilistic rounding.
    pub spread: Option<SampleSpread>,
}

/// Gradient trace, kept even when the solve fails.
pub type Trace = Option<GradTrace>;

pub fn solve_point(problem: &Problem, solver: &SolverConfig, seed: u64) -> (Result<Outcome, CoreError>, Trace) {
    let start = Instant::now();
    let (outcome, trace) = dispatch(problem, solver, seed);
    let outcome = outcome.map(|mut o| {
        o.result.stats.wall_time_s = start.elapsed().as_secs_f64();
        o
    });
    (outcome, trace)
}

fn dispatch(problem: &Problem, solver: &SolverConfig, seed: u64) -> (Result<Outcome, CoreError>, Trace) {
    match solver.method {
        Method::Exact => {
            let r = build(problem, Integrality::Binary).and_then(|p| solve_exact(&p, &solver.exact));
            (r.map(|result| Outcome { result, spread: None }), None)
        }
        Method::Lp => {
            let r = build(problem, Integrality::Relaxed).and_then(|p| solve_lp(&p)).and_then(|frac| {
                let stats = SolverStats { iterations: frac.iterations, lp_solves: 1, ..SolverStats::default() };
                round(problem, &frac, solver, seed, stats)
            });
            (r, None)
        }
        Method::Auglag | Method::Scgrad => {
            let grad = fairtopk_core::grad::GradConfig { seed, ..solver.grad };
            let run = if solver.method == Method::Auglag { solve_auglag } else { solve_scgrad };
            match run(problem, &grad) {
                Err(e) => (Err(e), None),
                Ok(Err(diverged)) => {
                    let trace = diverged.trace.clone();
                    (Err(diverged.into()), Some(trace))
                }
                Ok(Ok((frac, trace))) => {
                    let iterations = trace.steps.last().map_or(0, |s| s.iteration as u64 + 1);
                    let stats = SolverStats { iterations, ..SolverStats::default() };
                    (round(problem, &frac, solver, seed, stats), Some(trace))
                }
            }
        }
    }
}

fn round(
    problem: &Problem,
    frac: &FractionalSolution,
    solver: &SolverConfig,
    seed: u64,
    stats: SolverStats,
) -> Result<Outcome, CoreError> {
    match solver.rounding {
        Rounding::Topk => {
            Ok(Outcome { result: assess(problem, round_topk(frac, problem.params.k)?, stats)?, spread: None })
        }
        Rounding::Hard => Ok(Outcome { result: assess(problem, round_hard(frac), stats)?, spread: None }),
        Rounding::Prob => {
            let samples = round_prob(frac, seed, solver.samples)?;
            let (result, spread) = assess_samples(problem, samples, stats)?;
            Ok(Outcome { result, spread: Some(spread) })
        }
    }
}
