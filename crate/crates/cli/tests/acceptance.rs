//! Acceptance checks P1-P12, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process fails when a
//! criterion fails, except for those listed in `KNOWN_FAILURES`, whose lines
//! still read FAIL.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fairtopk_core::datagen::{gen_simrec, ItemOrder, SimRecConfig};
use fairtopk_core::exact::{solve_exact, ExactLimits};
use fairtopk_core::grad::{solve_auglag, solve_scgrad, GradConfig, GradModel, LossTerm};
use fairtopk_core::lp::{round_hard, round_prob, round_topk, solve_lp};
use fairtopk_core::marketsim::{sell_through_rate, simulate_purchases_in, CandidatePool, ConsumerOrder};
use fairtopk_core::metrics::{assess, top_k_sum};
use fairtopk_core::oracle::{brute_force_baseline, brute_force_solve, k_subsets, producer_fairness_baseline};
use fairtopk_core::program::{build, Integrality};
use fairtopk_core::rng::PortableRng;
use fairtopk_core::{
    Error, FairnessParams, GroupPartition, Objective, Problem, ProducerValues, RelevanceMatrix, SolveResult,
    SolverStats,
};

const KNOWN_FAILURES: &[&str] = &["P4"];

type Check = (&'static str, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_rho(rng: &mut PortableRng, m: usize, n: usize) -> RelevanceMatrix {
    RelevanceMatrix::new(m, n, (0..m * n).map(|_| rng.uniform()).collect()).unwrap()
}

fn exact(p: &Problem, limits: &ExactLimits) -> Result<SolveResult, Error> {
    solve_exact(&build(p, Integrality::Binary)?, limits)
}

fn simrec(m: usize, n: usize, groups: usize, seed: u64, order: ItemOrder) -> (RelevanceMatrix, GroupPartition) {
    gen_simrec(&SimRecConfig { m, n, groups, seed, item_order: order, ..SimRecConfig::default() }).unwrap()
}

fn p1() -> Verdict {
    let mut rng = PortableRng::new(1);
    let (mut worst, mut infeasible) = (0.0f64, 0);
    for case in 0..50 {
        let m = 1 + rng.below(3);
        let n = 1 + rng.below(4);
        let k = 1 + rng.below(2.min(n));
        let gamma = [0.0, 0.5, 1.0][rng.below(3)];
        let objective = [Objective::Mean, Objective::MaxMin, Objective::Cvar][case % 3];
        let params = FairnessParams::new(k, objective).with_gamma(gamma).with_alpha(0.5);
        let rho = random_rho(&mut rng, m, n);
        let g = 1 + rng.below(m);
        let groups = GroupPartition::new((0..m).map(|i| i % g).collect(), g).unwrap();
        let p = Problem::new(rho, groups, ProducerValues::uniform(n), params).unwrap();
        match (brute_force_solve(&p), exact(&p, &ExactLimits::default())) {
            (Ok(o), Ok(r)) => worst = worst.max((o.best_objective - r.objective_value).abs()),
            (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => infeasible += 1,
            (o, r) => return verdict(false, format!("case {case} disagrees: {o:?} vs {r:?}")),
        }
    }
    verdict(worst <= 1e-9, format!("50 instances, max |exact - oracle| = {worst:.2e}, {infeasible} infeasible in both"))
}

fn p2() -> Verdict {
    let mut checked = 0;
    for m in 1..=5 {
        for n in 1..=4 {
            for k in 1..=3.min(n) {
                let closed = producer_fairness_baseline(m, n, k).unwrap();
                if closed != m * k / n || closed != brute_force_baseline(m, n, k) {
                    return verdict(false, format!("m={m} n={n} k={k}: {closed}"));
                }
                checked += 1;
            }
        }
    }
    verdict(true, format!("{checked} (m, n, k) triples match enumeration"))
}

fn p3() -> Verdict {
    let mut rng = PortableRng::new(3);
    let (mut frac, mut diff) = (0.0f64, 0.0f64);
    for _ in 0..30 {
        let m = 5 + rng.below(36);
        let n = 2 + rng.below(39);
        let k = 1 + rng.below(n.min(5));
        let gamma = [0.0, 0.5, 1.0][rng.below(3)];
        let p =
            Problem::ungrouped(random_rho(&mut rng, m, n), FairnessParams::new(k, Objective::Mean).with_gamma(gamma))
                .unwrap();
        let lp = solve_lp(&build(&p, Integrality::Relaxed).unwrap()).unwrap();
        let ex = exact(&p, &ExactLimits::default()).unwrap();
        frac = frac.max(lp.weights.max_fractionality());
        diff = diff.max((lp.objective - ex.objective_value).abs());
    }
    verdict(
        frac <= 1e-6 && diff <= 1e-8,
        format!("30 instances, max fractionality {frac:.1e}, max |lp - exact| {diff:.1e}"),
    )
}

fn mean_utility_at_gammas(rho: &RelevanceMatrix, groups: &GroupPartition, k: usize, gammas: &[f64]) -> Vec<f64> {
    gammas
        .iter()
        .map(|&g| {
            let params = FairnessParams::new(k, Objective::Mean).with_gamma(g);
            let p = Problem::new(rho.clone(), groups.clone(), ProducerValues::uniform(rho.n()), params).unwrap();
            exact(&p, &ExactLimits::default()).unwrap().mean_utility
        })
        .collect()
}

fn p4() -> Verdict {
    let drop = |order| {
        let (rho, groups) = simrec(200, 10, 10, 0, order);
        let u = mean_utility_at_gammas(&rho, &groups, 1, &[0.0, 1.0]);
        (u[0], u[1], 1.0 - u[1] / u[0])
    };
    let (u0, u1, d) = drop(ItemOrder::Shared);
    let (_, _, d_perm) = drop(ItemOrder::PerConsumer);
    verdict(
        d <= 0.02,
        format!(
            "shared item grid: utility {u0:.4} -> {u1:.4} (drop {:.1}%); per-consumer item order drop {:.2}%",
            100.0 * d,
            100.0 * d_perm
        ),
    )
}

fn p5() -> Verdict {
    let (rho, groups) = simrec(200, 100, 10, 0, ItemOrder::Shared);
    let gammas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let u = mean_utility_at_gammas(&rho, &groups, 10, &gammas);
    let monotone = u.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let drop = 1.0 - u[4] / u[0];
    let shown: Vec<String> = u.iter().map(|x| format!("{x:.4}")).collect();
    verdict(
        monotone && drop >= 0.05,
        format!("utility over gamma grid [{}], drop {:.1}%", shown.join(", "), 100.0 * drop),
    )
}

/// Mean over groups of `1 - mean utility in the group`, computed directly.
fn mean_group_loss(rho: &RelevanceMatrix, groups: &GroupPartition, sel: &[Vec<usize>], k: usize) -> f64 {
    let mut loss = vec![0.0; groups.group_count()];
    for (i, s) in sel.iter().enumerate() {
        let row = rho.row(i);
        let u = s.iter().map(|&j| row[j]).sum::<f64>() / top_k_sum(row, k);
        let g = groups.group_of(i);
        loss[g] += (1.0 - u) / groups.sizes()[g] as f64;
    }
    loss.iter().sum::<f64>() / loss.len() as f64
}

fn p6() -> Verdict {
    let mut rng = PortableRng::new(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = 2 + rng.below(3);
        let n = 2 + rng.below(3);
        let k = 1 + rng.below(2.min(n));
        let gamma = [0.0, 0.5, 1.0][rng.below(3)];
        let rho = random_rho(&mut rng, m, n);
        let groups = GroupPartition::new((0..m).map(|i| i % 2).collect(), 2).unwrap();
        let params = FairnessParams::new(k, Objective::Cvar).with_gamma(gamma).with_alpha(0.0);
        let p = Problem::new(rho.clone(), groups.clone(), ProducerValues::uniform(n), params).unwrap();
        let floor = p.producer_floor().unwrap_or(0);
        let cvar = exact(&p, &ExactLimits::default()).unwrap().objective_value;
        // minimum mean loss over every feasible allocation
        let subsets = k_subsets(n, k);
        let mut best = f64::INFINITY;
        let mut choice = vec![0usize; m];
        loop {
            let sel: Vec<Vec<usize>> = choice.iter().map(|&c| subsets[c].clone()).collect();
            let mut exposure = vec![0; n];
            sel.iter().flatten().for_each(|&j| exposure[j] += 1);
            if exposure.iter().all(|&e| e >= floor) {
                best = best.min(mean_group_loss(&rho, &groups, &sel, k));
            }
            let Some(pos) = (0..m).find(|&i| choice[i] + 1 < subsets.len()) else { break };
            choice[pos] += 1;
            choice[..pos].iter_mut().for_each(|c| *c = 0);
        }
        worst = worst.max((cvar - best).abs());
    }
    verdict(worst <= 1e-8, format!("20 instances, max |CVaR_0 - mean loss| = {worst:.2e}"))
}

fn p7() -> Verdict {
    let limits = ExactLimits { node_cap: 50, time_cap_s: 60.0, gap_tolerance: 1e-6 };
    let mut wins = 0;
    let (mut vm, mut vc) = (0.0, 0.0);
    for seed in 0..20 {
        let (rho, groups) = simrec(300, 100, 10, seed, ItemOrder::Shared);
        let var = |objective| {
            let params = FairnessParams::new(5, objective).with_gamma(0.5).with_alpha(0.95);
            let p = Problem::new(rho.clone(), groups.clone(), ProducerValues::uniform(100), params).unwrap();
            exact(&p, &limits).unwrap().group_variance
        };
        let (mean_var, cvar_var) = (var(Objective::Mean), var(Objective::Cvar));
        vm += mean_var / 20.0;
        vc += cvar_var / 20.0;
        if cvar_var <= mean_var {
            wins += 1;
        }
    }
    verdict(wins >= 16, format!("CVaR variance <= Mean variance in {wins}/20 seeds (avg {vc:.2e} vs {vm:.2e})"))
}

fn p8() -> Verdict {
    let (mut hard_under, mut hard_over, mut prob_under, mut prob_over) = (0.0, 0.0, 0.0, 0.0);
    let mut count = 0.0;
    for seed in 0..6 {
        let (rho, groups) = simrec(60, 30, 6, seed, ItemOrder::Shared);
        let values =
            fairtopk_core::datagen::gen_values(&rho, 3, fairtopk_core::datagen::ValueMode::InversePopularity).unwrap();
        for (objective, theta) in [(Objective::Cvar, 0.0), (Objective::Mean, 0.4), (Objective::MaxMin, 0.0)] {
            let params = FairnessParams::new(3, objective).with_gamma(0.75).with_alpha(0.9).with_theta(theta);
            let p = Problem::new(rho.clone(), groups.clone(), values.clone(), params).unwrap();
            let frac = solve_lp(&build(&p, Integrality::Relaxed).unwrap()).unwrap();
            let top = assess(&p, round_topk(&frac, 3).unwrap(), SolverStats::default()).unwrap();
            if top.violations.under_alloc_pct != 0.0 || top.violations.over_alloc_pct != 0.0 {
                return verdict(false, format!("seed {seed} {objective:?}: top-k {:?}", top.violations));
            }
            let hard = assess(&p, round_hard(&frac), SolverStats::default()).unwrap().violations;
            let (prob, _) = fairtopk_core::metrics::assess_samples(
                &p,
                round_prob(&frac, seed, 32).unwrap(),
                SolverStats::default(),
            )
            .unwrap();
            hard_under += hard.under_alloc_pct;
            hard_over += hard.over_alloc_pct;
            prob_under += prob.violations.under_alloc_pct;
            prob_over += prob.violations.over_alloc_pct;
            count += 1.0;
        }
    }
    let all = [hard_under, hard_over, prob_under, prob_over];
    verdict(
        all.iter().all(|x| x.is_finite()),
        format!(
            "top-k 0% under/over on {count} LPs; hard {:.2}%/{:.2}%, prob {:.2}%/{:.2}% under/over",
            hard_under / count,
            hard_over / count,
            prob_under / count,
            prob_over / count
        ),
    )
}

fn p9() -> Verdict {
    let limits = ExactLimits { node_cap: 200, time_cap_s: 120.0, gap_tolerance: 1e-6 };
    let (mut worst_aug, mut worst_sc) = (0.0f64, 0.0f64);
    for seed in 0..10 {
        let (rho, groups) = simrec(100, 100, 10, seed, ItemOrder::Shared);
        let params = FairnessParams::new(10, Objective::Cvar).with_gamma(0.5).with_alpha(0.95);
        let p = Problem::new(rho, groups, ProducerValues::uniform(100), params).unwrap();
        let base = exact(&p, &limits).unwrap().mean_utility;
        let cfg = GradConfig { seed, ..GradConfig::default() };
        for (solver, worst) in [(solve_auglag as fn(_, _) -> _, &mut worst_aug), (solve_scgrad, &mut worst_sc)] {
            let (frac, _) = solver(&p, &cfg).unwrap().unwrap();
            let u = assess(&p, round_topk(&frac, 10).unwrap(), SolverStats::default()).unwrap().mean_utility;
            *worst = worst.max((u - base).abs());
        }
    }
    verdict(
        worst_aug <= 0.03 && worst_sc <= 0.05,
        format!("max |utility - exact|: AugLag {worst_aug:.4}, SCGrad {worst_sc:.4} over 10 instances"),
    )
}

fn p10() -> Verdict {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut rng = PortableRng::new(100 + seed);
        let rho = random_rho(&mut rng, 10, 10);
        let groups = GroupPartition::new((0..10).map(|i| i % 3).collect(), 3).unwrap();
        let params = FairnessParams::new(3, Objective::Cvar).with_gamma(1.0).with_alpha(0.7);
        let p = Problem::new(rho, groups, ProducerValues::uniform(10), params).unwrap();
        let model = GradModel::new(&p).unwrap();
        let z: Vec<f64> = (0..100).map(|_| rng.normal(0.0, 1.0)).collect();
        let (eta, tau) = (0.7, 0.05);
        let rel = |a: f64, b: f64| if (a - b).abs() < 1e-10 { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        for term in [LossTerm::Util, LossTerm::Card, LossTerm::Prod, LossTerm::Bin] {
            let g = model.grad_z(term, &z, eta, tau);
            for v in 0..z.len() {
                let (mut zp, mut zm) = (z.clone(), z.clone());
                zp[v] += h;
                zm[v] -= h;
                let fd = (model.loss(term, &model.weights(&zp, eta), tau)
                    - model.loss(term, &model.weights(&zm, eta), tau))
                    / (2.0 * h);
                worst = worst.max(rel(fd, g[v]));
            }
        }
        let w = model.weights(&z, eta);
        let fd = (model.loss(LossTerm::Util, &w, tau + h) - model.loss(LossTerm::Util, &w, tau - h)) / (2.0 * h);
        worst = worst.max(rel(fd, model.tau_grad(&w, tau)));
    }
    verdict(worst <= 1e-4, format!("5 instances, 4 terms + tau, max relative error {worst:.1e}"))
}

fn p11() -> Verdict {
    let seeds = 20;
    let mut str_sum = [[0.0; 2]; 2];
    for seed in 0..seeds {
        let (rho, groups) = simrec(300, 100, 10, seed, ItemOrder::Shared);
        let values = ProducerValues::uniform(100);
        for (gi, gamma) in [0.0, 1.0].into_iter().enumerate() {
            let params = FairnessParams::new(5, Objective::Mean).with_gamma(gamma);
            let p = Problem::new(rho.clone(), groups.clone(), values.clone(), params).unwrap();
            let w = exact(&p, &ExactLimits::default()).unwrap().allocation;
            for (pi, pool) in [CandidatePool::Unsold, CandidatePool::Allocated].into_iter().enumerate() {
                let log = simulate_purchases_in(&rho, &w, 5, &values, seed, ConsumerOrder::Shuffled, pool).unwrap();
                if log.purchase_count() > 100 {
                    return verdict(false, format!("seed {seed}: {} purchases", log.purchase_count()));
                }
                str_sum[pi][gi] += sell_through_rate(&log, 100) / seeds as f64;
            }
        }
    }
    let [unsold, allocated] = str_sum;
    println!("    diagnostic: allocated-only pool mean STR gamma=0 {:.3}, gamma=1 {:.3}", allocated[0], allocated[1]);
    verdict(
        unsold[1] >= unsold[0],
        format!("conservation held; mean STR gamma=0 {:.3}, gamma=1 {:.3} over {seeds} seeds", unsold[0], unsold[1]),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_fairtopk")).current_dir(dir).args(args).output().unwrap();
    out.status.code().unwrap_or(-1)
}

fn deterministic_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in ["gen", "sweep", "simulate", "bench"] {
        let d = dir.join(sub);
        let mut names: Vec<String> =
            fs::read_dir(&d).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        for name in names.into_iter().filter(|n| !n.ends_with(".timing.csv") && !n.ends_with(".json")) {
            let bytes = fs::read(d.join(&name)).unwrap();
            files.push((format!("{sub}/{name}"), bytes));
        }
    }
    files
}

fn p12() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let config = r#"{
        "dataset": {"simrec": {"m": 60, "n": 20, "groups": 4}},
        "solver": {"method": "lp", "rounding": "prob", "samples": 8, "grad": {"iterations": 100}},
        "grid": {"objective": ["mean", "cvar"], "k": [2, 4], "gamma": [0, 0.5, 1], "alpha": [0.9], "theta": [0, 0.3]},
        "seeds": [1, 2],
        "bench": {"sizes": [8, 12], "repeats": 1, "exact": {"node_cap": 20}}
    }"#;
    fs::write(tmp.path().join("manifest.json"), config).unwrap();
    let mut runs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "3")] {
        let root = tmp.path().join(run);
        let o = |s: &str| root.join(s).to_string_lossy().into_owned();
        let base = ["-c", "manifest.json", "--threads", threads];
        let codes = [
            run_cli(tmp.path(), &[&["gen", "-o", &o("gen")], &base[..]].concat()),
            run_cli(tmp.path(), &[&["sweep", "-o", &o("sweep")], &base[..]].concat()),
            run_cli(
                tmp.path(),
                &[&["simulate", "-o", &o("simulate"), "--log", &o("simulate/log.csv")], &base[..]].concat(),
            ),
            run_cli(tmp.path(), &[&["bench", "-o", &o("bench")], &base[..]].concat()),
        ];
        // infeasible theta/gamma combinations are allowed to mark rows
        if codes.iter().any(|&c| c != 0 && c != 5) {
            return verdict(false, format!("run {run} exit codes {codes:?}"));
        }
        runs.push(deterministic_files(&root));
    }
    let same = runs[0] == runs[1];
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    verdict(
        same && names.len() >= 9,
        format!("{} output files byte identical across reruns (1 vs 3 threads)", names.len()),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Check; 12] = [
        ("P1", "oracle equivalence", p1),
        ("P2", "producer baseline", p2),
        ("P3", "LP integrality", p3),
        ("P4", "free fairness at k=1", p4),
        ("P5", "fairness cost at k>1", p5),
        ("P6", "CVaR degeneracy", p6),
        ("P7", "group-variance compression", p7),
        ("P8", "rounding feasibility", p8),
        ("P9", "gradient solver quality", p9),
        ("P10", "gradient correctness", p10),
        ("P11", "market-sim conservation and direction", p11),
        ("P12", "determinism", p12),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("{id:<4}{status} {name}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
        if v.pass {
            passed += 1;
        } else if !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("acceptance: {passed}/{ran} passed; known failures: {}", KNOWN_FAILURES.join(", "));
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
