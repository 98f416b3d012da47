use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fairtopk_core::datagen::{gen_simrec, SimRecConfig};
use fairtopk_core::exact::solve_exact;
use fairtopk_core::marketsim::{realized_gmv, sell_through_rate, simulate_purchases_in};
use fairtopk_core::metrics::{gmv_of_allocation, MeanSe};
use fairtopk_core::program::{build, Integrality};
use fairtopk_core::rng::derive_seed;
use fairtopk_core::{Error as CoreError, FairnessParams, Objective, Problem, ProducerValues};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BenchArgs, GenArgs, SimulateArgs, SolveArgs, SweepArgs};
use crate::config::{sha256_hex, BenchSolver, Dataset, ExperimentConfig, GridPoint, Method, Rounding, SolverConfig};
use crate::error::{error_tag, CliError, CliResult};
use crate::io::{self, MatrixFormat};
use crate::solve::{load_instance, problem_for, solve_point, values_for, Instance, Outcome};
use crate::svg::{Chart, Series};

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(t).build().map_err(|e| CliError::usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Exact => "exact",
        Method::Lp => "lp",
        Method::Auglag => "auglag",
        Method::Scgrad => "scgrad",
    }
}

fn rounding_of(s: &SolverConfig) -> Option<Rounding> {
    (s.method != Method::Exact).then_some(s.rounding)
}

/// Seed used by point `p` under master seed `seed`.
pub fn point_seed(seed: u64, point: usize) -> u64 {
    derive_seed(seed, &[point as u64])
}

fn market_seed(seed: u64, point: usize) -> u64 {
    derive_seed(seed, &[point as u64, 1])
}

#[derive(Debug, Serialize)]
struct Manifest {
    seed: u64,
    config_hash: String,
    config: ExperimentConfig,
    /// File name to SHA-256.
    files: BTreeMap<String, String>,
}

pub fn gen(args: &GenArgs) -> CliResult<()> {
    let config = args.common.resolve()?;
    let Dataset::Simrec(sim) = &config.dataset else {
        return Err(CliError::usage("gen needs a simrec dataset"));
    };
    let seed = config.seeds[0];
    let (rho, groups) = gen_simrec(&SimRecConfig { seed, ..sim.clone() })?;
    let instance = Instance { rho, groups, values: None };
    let values = values_for(&instance, config.values, config.grid.k[0].min(instance.rho.n()))?;
    let dir = &config.output;
    let rel_name = match args.format {
        MatrixFormat::Csv => "relevance.csv",
        MatrixFormat::Raw => "relevance.f32",
    };
    io::write_relevance(&dir.join(rel_name), &instance.rho, args.format)?;
    io::write_groups(&dir.join("groups.csv"), &instance.groups)?;
    io::write_values(&dir.join("values.csv"), &values)?;
    let mut names = vec![rel_name.to_string(), "groups.csv".into(), "values.csv".into()];
    if args.format == MatrixFormat::Raw {
        names.push(format!("{rel_name}.json"));
    }
    let mut files = BTreeMap::new();
    for name in names {
        let p = dir.join(&name);
        let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        files.insert(name, sha256_hex(&bytes));
    }
    let manifest = Manifest { seed, config_hash: config.hash(), config: config.clone(), files };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    println!("wrote {}x{} dataset to {}", instance.rho.m(), instance.rho.n(), dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    status: &'static str,
    config_hash: String,
    seed: u64,
    method: &'static str,
    rounding: Option<Rounding>,
    point: GridPoint,
    m: usize,
    n: usize,
    producer_floor: Option<usize>,
    gmv_floor: Option<f64>,
    gmv: f64,
    result: &'a fairtopk_core::SolveResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    spread: Option<fairtopk_core::metrics::SampleSpread>,
}

#[derive(Debug, Serialize)]
struct ErrorFile {
    config_hash: String,
    seed: u64,
    #[serde(flatten)]
    error: crate::error::ErrorReport,
}

pub fn solve(args: &SolveArgs) -> CliResult<()> {
    let config = args.common.resolve()?;
    let seed = config.seeds[0];
    let hash = config.hash();
    let run = || -> CliResult<()> {
        let instance = load_instance(&config, seed)?;
        let point = config.grid.first();
        let problem = problem_for(&config, &instance, &point)?;
        if let Some(lp_path) = &args.lp {
            let integrality =
                if config.solver.method == Method::Exact { Integrality::Binary } else { Integrality::Relaxed };
            let mut text = String::new();
            build(&problem, integrality)?.write_lp(&mut text).expect("string write");
            io::write_file(lp_path, text.as_bytes())?;
        }
        let (outcome, trace) = solve_point(&problem, &config.solver, point_seed(seed, point.index));
        if let (Some(path), Some(trace)) = (&args.trace, &trace) {
            io::write_csv(path, &trace.steps)?;
        }
        let Outcome { result, spread } = outcome?;
        let report = SolveReport {
            status: "ok",
            config_hash: hash.clone(),
            seed,
            method: method_name(config.solver.method),
            rounding: rounding_of(&config.solver),
            point,
            m: problem.m(),
            n: problem.n(),
            producer_floor: problem.producer_floor(),
            gmv_floor: problem.gmv_floor(),
            gmv: gmv_of_allocation(&result.allocation, &problem.values)?,
            result: &result,
            spread,
        };
        let path = args.result.clone().unwrap_or_else(|| config.output.join("result.json"));
        io::write_json(&path, &report)?;
        println!(
            "objective {} mean utility {} group variance {} -> {}",
            result.objective_value,
            result.mean_utility,
            result.group_variance,
            path.display()
        );
        Ok(())
    };
    run().inspect_err(|e| {
        if matches!(e, CliError::Solve(_)) {
            let file = ErrorFile { config_hash: hash.clone(), seed, error: e.report() };
            println!("{}", serde_json::to_string(&file).expect("report serializes"));
            let _ = io::write_json(&config.output.join("error.json"), &file);
        }
    })
}

/// One solved (seed, point) job.
struct Job {
    seed: u64,
    point: GridPoint,
    outcome: Result<(Outcome, Problem), CoreError>,
}

fn run_jobs(config: &ExperimentConfig, threads: Option<usize>) -> CliResult<Vec<Job>> {
    let points = config.grid.points();
    let instances = config
        .seeds
        .iter()
        .map(|&s| Ok((s, load_instance(config, s)?)))
        .collect::<CliResult<Vec<(u64, Instance)>>>()?;
    let tasks: Vec<(u64, &Instance, GridPoint)> =
        instances.iter().flat_map(|(s, inst)| points.iter().map(move |p| (*s, inst, *p))).collect();
    in_pool(threads, || {
        tasks
            .par_iter()
            .map(|&(seed, inst, point)| {
                let outcome = problem_for(config, inst, &point).and_then(|problem| {
                    let (o, _) = solve_point(&problem, &config.solver, point_seed(seed, point.index));
                    o.map(|o| (o, problem))
                });
                Job { seed, point, outcome }
            })
            .collect()
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    config_hash: String,
    seed: u64,
    point: usize,
    objective: Objective,
    k: usize,
    gamma: f64,
    alpha: f64,
    theta: f64,
    method: &'static str,
    rounding: Option<Rounding>,
    status: &'static str,
    error: String,
    message: String,
    objective_value: Option<f64>,
    mean_utility: Option<f64>,
    mean_utility_se: Option<f64>,
    group_variance: Option<f64>,
    under_alloc_pct: Option<f64>,
    over_alloc_pct: Option<f64>,
    producer_violation_pct: Option<f64>,
    gmv: Option<f64>,
    gmv_floor: Option<f64>,
    gmv_violated: Option<bool>,
    caps_hit: Option<bool>,
    gap: Option<f64>,
    nodes: Option<u64>,
    iterations: Option<u64>,
}

#[derive(Debug, Serialize)]
struct TimingRow {
    seed: u64,
    point: usize,
    wall_time_s: f64,
}

fn timing_path(csv: &Path) -> PathBuf {
    csv.with_extension("timing.csv")
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let config = args.common.resolve()?;
    let hash = config.hash();
    let jobs = run_jobs(&config, args.common.threads)?;
    let mut rows = Vec::with_capacity(jobs.len());
    let mut timing = Vec::new();
    for job in &jobs {
        let p = job.point;
        let mut row = SweepRow {
            config_hash: hash.clone(),
            seed: job.seed,
            point: p.index,
            objective: p.objective,
            k: p.k,
            gamma: p.gamma,
            alpha: p.alpha,
            theta: p.theta,
            method: method_name(config.solver.method),
            rounding: rounding_of(&config.solver),
            status: "ok",
            error: String::new(),
            message: String::new(),
            objective_value: None,
            mean_utility: None,
            mean_utility_se: None,
            group_variance: None,
            under_alloc_pct: None,
            over_alloc_pct: None,
            producer_violation_pct: None,
            gmv: None,
            gmv_floor: None,
            gmv_violated: None,
            caps_hit: None,
            gap: None,
            nodes: None,
            iterations: None,
        };
        match &job.outcome {
            Ok((o, problem)) => {
                let r = &o.result;
                row.objective_value = Some(r.objective_value);
                row.mean_utility = Some(r.mean_utility);
                row.mean_utility_se = o.spread.map(|s| s.mean_utility.se);
                row.group_variance = Some(r.group_variance);
                row.under_alloc_pct = Some(r.violations.under_alloc_pct);
                row.over_alloc_pct = Some(r.violations.over_alloc_pct);
                row.producer_violation_pct = Some(r.violations.producer_violation_pct);
                row.gmv = gmv_of_allocation(&r.allocation, &problem.values).ok();
                row.gmv_floor = Some(problem.gmv_floor().unwrap_or(0.0));
                row.gmv_violated = Some(r.violations.gmv_violated);
                row.caps_hit = Some(r.stats.caps_hit);
                row.gap = r.stats.gap;
                row.nodes = Some(r.stats.nodes);
                row.iterations = Some(r.stats.iterations);
                timing.push(TimingRow { seed: job.seed, point: p.index, wall_time_s: r.stats.wall_time_s });
            }
            Err(e) => {
                row.status = "error";
                row.error = error_tag(e);
                row.message = e.to_string();
            }
        }
        rows.push(row);
    }
    let out = config.output.join("sweep.csv");
    io::write_csv(&out, &rows)?;
    io::write_csv(&timing_path(&out), &timing)?;
    io::write_file(&config.output.join("utility_vs_gamma.svg"), utility_chart(&config, &rows).render().as_bytes())?;
    io::write_file(&config.output.join("gmv_vs_theta.svg"), gmv_chart(&config, &rows).render().as_bytes())?;
    finish(&rows.iter().map(|r| r.status).collect::<Vec<_>>(), &out)
}

fn finish(statuses: &[&str], out: &Path) -> CliResult<()> {
    let failed = statuses.iter().filter(|s| **s != "ok").count();
    println!("{} rows ({failed} failed) -> {}", statuses.len(), out.display());
    if failed > 0 {
        return Err(CliError::Partial { failed, total: statuses.len() });
    }
    Ok(())
}

/// Averages `y` over seeds for every x, keeping x in grid order.
fn averaged(points: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut acc: Vec<(f64, f64, usize)> = Vec::new();
    for (x, y) in points {
        match acc.iter_mut().find(|a| a.0 == x) {
            Some(a) => {
                a.1 += y;
                a.2 += 1;
            }
            None => acc.push((x, y, 1)),
        }
    }
    acc.sort_by(|a, b| a.0.total_cmp(&b.0));
    acc.into_iter().map(|(x, s, c)| (x, s / c as f64)).collect()
}

fn utility_chart(config: &ExperimentConfig, rows: &[SweepRow]) -> Chart {
    let g = &config.grid;
    let series =
        g.k.iter()
            .map(|&k| Series {
                label: format!("k={k}"),
                points: averaged(
                    rows.iter()
                        .filter(|r| {
                            r.k == k && r.objective == g.objective[0] && r.alpha == g.alpha[0] && r.theta == g.theta[0]
                        })
                        .filter_map(|r| Some((r.gamma, r.mean_utility?))),
                ),
            })
            .collect();
    Chart { title: "Mean utility vs gamma".into(), x_label: "gamma".into(), y_label: "mean utility".into(), series }
}

fn gmv_chart(config: &ExperimentConfig, rows: &[SweepRow]) -> Chart {
    let g = &config.grid;
    let series = g
        .objective
        .iter()
        .map(|&o| Series {
            label: format!("{o:?}"),
            points: averaged(
                rows.iter()
                    .filter(|r| r.objective == o && r.k == g.k[0] && r.gamma == g.gamma[0] && r.alpha == g.alpha[0])
                    .filter_map(|r| Some((r.theta, r.gmv?))),
            ),
        })
        .collect();
    Chart { title: "GMV vs theta".into(), x_label: "theta".into(), y_label: "GMV".into(), series }
}

#[derive(Debug, Serialize)]
struct SimRow {
    config_hash: String,
    seed: u64,
    point: usize,
    objective: Objective,
    k: usize,
    gamma: f64,
    alpha: f64,
    theta: f64,
    status: &'static str,
    error: String,
    message: String,
    purchases: Option<usize>,
    sell_through_rate: Option<f64>,
    realized_gmv: Option<f64>,
    mean_utility: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SimSummaryRow {
    config_hash: String,
    point: usize,
    objective: Objective,
    k: usize,
    gamma: f64,
    alpha: f64,
    theta: f64,
    seeds: usize,
    str_mean: f64,
    str_se: f64,
    gmv_mean: f64,
    gmv_se: f64,
}

#[derive(Debug, Serialize)]
struct LogRow {
    seed: u64,
    point: usize,
    step: usize,
    consumer: usize,
    producer: usize,
    value: f64,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let config = args.common.resolve()?;
    let hash = config.hash();
    let jobs = run_jobs(&config, args.common.threads)?;
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    let mut log_rows = Vec::new();
    for job in &jobs {
        let p = job.point;
        let mut row = SimRow {
            config_hash: hash.clone(),
            seed: job.seed,
            point: p.index,
            objective: p.objective,
            k: p.k,
            gamma: p.gamma,
            alpha: p.alpha,
            theta: p.theta,
            status: "ok",
            error: String::new(),
            message: String::new(),
            purchases: None,
            sell_through_rate: None,
            realized_gmv: None,
            mean_utility: None,
        };
        let sim = job.outcome.as_ref().map_err(Clone::clone).and_then(|(o, problem)| {
            let log = simulate_purchases_in(
                &problem.rho,
                &o.result.allocation,
                p.k,
                &problem.values,
                market_seed(job.seed, p.index),
                config.market.order,
                config.market.pool,
            )?;
            Ok((o, problem, log))
        });
        match sim {
            Ok((o, problem, log)) => {
                row.purchases = Some(log.purchase_count());
                row.sell_through_rate = Some(sell_through_rate(&log, problem.n()));
                row.realized_gmv = Some(realized_gmv(&log, &problem.values));
                row.mean_utility = Some(o.result.mean_utility);
                timing.push(TimingRow { seed: job.seed, point: p.index, wall_time_s: o.result.stats.wall_time_s });
                if args.log.is_some() {
                    log_rows.extend(log.events.iter().map(|e| LogRow {
                        seed: job.seed,
                        point: p.index,
                        step: e.step,
                        consumer: e.consumer,
                        producer: e.producer,
                        value: e.value,
                    }));
                }
            }
            Err(e) => {
                row.status = "error";
                row.error = error_tag(&e);
                row.message = e.to_string();
            }
        }
        rows.push(row);
    }
    let summary: Vec<SimSummaryRow> = config
        .grid
        .points()
        .iter()
        .map(|p| {
            let ok: Vec<&SimRow> = rows.iter().filter(|r| r.point == p.index && r.status == "ok").collect();
            let strs = MeanSe::of(&ok.iter().filter_map(|r| r.sell_through_rate).collect::<Vec<_>>());
            let gmvs = MeanSe::of(&ok.iter().filter_map(|r| r.realized_gmv).collect::<Vec<_>>());
            SimSummaryRow {
                config_hash: hash.clone(),
                point: p.index,
                objective: p.objective,
                k: p.k,
                gamma: p.gamma,
                alpha: p.alpha,
                theta: p.theta,
                seeds: ok.len(),
                str_mean: strs.mean,
                str_se: strs.se,
                gmv_mean: gmvs.mean,
                gmv_se: gmvs.se,
            }
        })
        .collect();
    let out = config.output.join("simulate.csv");
    io::write_csv(&out, &rows)?;
    io::write_csv(&timing_path(&out), &timing)?;
    io::write_csv(&config.output.join("simulate_summary.csv"), &summary)?;
    if let Some(path) = &args.log {
        io::write_csv(path, &log_rows)?;
    }
    finish(&rows.iter().map(|r| r.status).collect::<Vec<_>>(), &out)
}

pub const BENCH_GAMMA: f64 = 0.5;
pub const BENCH_ALPHA: f64 = 0.95;
pub const BENCH_K: usize = 10;

#[derive(Debug, Serialize)]
struct BenchRow {
    config_hash: String,
    seed: u64,
    size: usize,
    solver: &'static str,
    repeat: usize,
    status: &'static str,
    error: String,
    message: String,
    objective_value: Option<f64>,
    mean_utility: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BenchTiming {
    size: usize,
    solver: &'static str,
    repeat: usize,
    wall_time_s: f64,
}

fn bench_problem(size: usize, seed: u64) -> Result<Problem, CoreError> {
    let sim = SimRecConfig { m: size, n: size, groups: size.min(10), seed, ..SimRecConfig::default() };
    let (rho, groups) = gen_simrec(&sim)?;
    let params =
        FairnessParams::new(BENCH_K.min(size), Objective::Cvar).with_gamma(BENCH_GAMMA).with_alpha(BENCH_ALPHA);
    Problem::new(rho, groups, ProducerValues::uniform(size), params)
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let mut config = args.common.resolve()?;
    if let Some(s) = &args.sizes {
        config.bench.sizes = s.clone();
    }
    if let Some(s) = &args.solvers {
        config.bench.solvers = s.clone();
    }
    if let Some(r) = args.repeats {
        config.bench.repeats = r;
    }
    if let Some(c) = args.common.node_cap {
        config.bench.exact.node_cap = c;
    }
    if let Some(t) = args.common.time_cap {
        config.bench.exact.time_cap_s = t;
    }
    config.validate_bench()?;
    let hash = config.hash();
    let seed = config.seeds[0];
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for &size in &config.bench.sizes {
        let problem = bench_problem(size, derive_seed(seed, &[size as u64]))?;
        for &solver in &config.bench.solvers {
            for repeat in 0..config.bench.repeats {
                let start = Instant::now();
                let outcome = bench_one(&problem, solver, &config, seed);
                let secs = start.elapsed().as_secs_f64();
                let mut row = BenchRow {
                    config_hash: hash.clone(),
                    seed,
                    size,
                    solver: solver.name(),
                    repeat,
                    status: "ok",
                    error: String::new(),
                    message: String::new(),
                    objective_value: None,
                    mean_utility: None,
                };
                match outcome {
                    Ok(r) => {
                        row.status = if r.stats.caps_hit { "timeout" } else { "ok" };
                        row.objective_value = Some(r.objective_value);
                        row.mean_utility = Some(r.mean_utility);
                    }
                    Err(e @ CoreError::NoSolution { .. }) => {
                        row.status = "timeout";
                        row.error = error_tag(&e);
                        row.message = e.to_string();
                    }
                    Err(e) => {
                        row.status = "error";
                        row.error = error_tag(&e);
                        row.message = e.to_string();
                    }
                }
                rows.push(row);
                timing.push(BenchTiming { size, solver: solver.name(), repeat, wall_time_s: secs });
            }
        }
    }
    let out = config.output.join("bench.csv");
    io::write_csv(&out, &rows)?;
    io::write_csv(&timing_path(&out), &timing)?;
    for warning in monotonicity_warnings(&timing, BenchSolver::LpTopk.name()) {
        eprintln!("warning: {warning}");
    }
    println!("{} timing rows -> {}", rows.len(), out.display());
    Ok(())
}

fn bench_one(
    problem: &Problem,
    solver: BenchSolver,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<fairtopk_core::SolveResult, CoreError> {
    if solver == BenchSolver::Exact {
        return solve_exact(&build(problem, Integrality::Binary)?, &config.bench.exact);
    }
    let method = match solver {
        BenchSolver::LpTopk => Method::Lp,
        BenchSolver::Auglag => Method::Auglag,
        _ => Method::Scgrad,
    };
    let s = SolverConfig { method, rounding: Rounding::Topk, ..config.solver.clone() };
    solve_point(problem, &s, seed).0.map(|o| o.result)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Sizes at which the median time of `solver` drops below the previous size.
fn monotonicity_warnings(timing: &[BenchTiming], solver: &str) -> Vec<String> {
    let mut sizes: Vec<usize> = timing.iter().filter(|t| t.solver == solver).map(|t| t.size).collect();
    sizes.sort();
    sizes.dedup();
    let medians: Vec<(usize, f64)> = sizes
        .iter()
        .map(|&s| {
            (s, median(timing.iter().filter(|t| t.solver == solver && t.size == s).map(|t| t.wall_time_s).collect()))
        })
        .collect();
    medians
        .windows(2)
        .filter(|w| w[1].1 < w[0].1)
        .map(|w| {
            format!("{solver} median time {:.4}s at size {} is below {:.4}s at size {}", w[1].1, w[1].0, w[0].1, w[0].0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_warnings() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0]), 2.5);
        let t = |size, s| BenchTiming { size, solver: "lp+topk", repeat: 0, wall_time_s: s };
        assert!(monotonicity_warnings(&[t(50, 0.1), t(100, 0.2)], "lp+topk").is_empty());
        assert_eq!(monotonicity_warnings(&[t(50, 0.3), t(100, 0.2)], "lp+topk").len(), 1);
    }

    #[test]
    fn averaged_groups_by_x() {
        assert_eq!(averaged([(1.0, 2.0), (0.0, 1.0), (1.0, 4.0)].into_iter()), vec![(0.0, 1.0), (1.0, 3.0)]);
    }
}
