//! The relaxation optimum is checked with a dual certificate computed here
//! from the program rows alone: any sign-feasible row multiplier `y` gives
//! the bound `b.y + sum_j max_{x_j in [l_j, u_j]} (c - A'y)_j x_j` (max sense),
//! so a primal-feasible point matching it is optimal.

use fairtopk_core::datagen::{gen_simrec, gen_values, SimRecConfig, ValueMode};
use fairtopk_core::lp::solve_lp;
use fairtopk_core::program::{build, Integrality, RowKind, Sense, StandardProgram};
use fairtopk_core::rng::PortableRng;
use fairtopk_core::{Error, FairnessParams, GroupPartition, Objective, Problem, ProducerValues, RelevanceMatrix};

fn dual_bound(program: &StandardProgram, duals: &[f64]) -> f64 {
    let max = program.sense == Sense::Maximize;
    let mut reduced = program.objective.clone();
    let mut bound = program.offset;
    for (row, &raw) in program.rows.iter().zip(duals) {
        // project onto the sign-feasible cone so the bound stays valid
        let y = match (row.kind, max) {
            (RowKind::Eq, _) => raw,
            (RowKind::Le, true) | (RowKind::Ge, false) => raw.max(0.0),
            (RowKind::Ge, true) | (RowKind::Le, false) => raw.min(0.0),
        };
        bound += row.rhs * y;
        for &(v, a) in &row.coeffs {
            reduced[v] -= a * y;
        }
    }
    for ((r, l), u) in reduced.iter().zip(&program.lower).zip(&program.upper) {
        bound += if max { (r * l).max(r * u) } else { (r * l).min(r * u) };
    }
    bound
}

fn certify(problem: &Problem) -> Result<f64, Error> {
    let program = build(problem, Integrality::Relaxed)?;
    let sol = solve_lp(&program)?;
    assert_eq!(program.first_violation(&sol.values, 1e-7), None, "primal infeasible");
    let bound = dual_bound(&program, &sol.duals);
    let tol = 1e-7 * (1.0 + sol.objective.abs());
    assert!((bound - sol.objective).abs() <= tol, "objective {} bound {}", sol.objective, bound);
    Ok(sol.objective)
}

fn random_problem(rng: &mut PortableRng, m: usize, n: usize, groups: usize, params: FairnessParams) -> Problem {
    let rho = RelevanceMatrix::new(m, n, (0..m * n).map(|_| rng.uniform()).collect()).unwrap();
    let labels = (0..m).map(|i| i % groups).collect();
    let values = ProducerValues::new((0..n).map(|_| 0.1 + rng.uniform()).collect()).unwrap();
    Problem::new(rho, GroupPartition::new(labels, groups).unwrap(), values, params).unwrap()
}

#[test]
fn random_relaxations_are_certified() {
    let mut rng = PortableRng::new(41);
    let mut solved = 0;
    for case in 0..60 {
        let m = 3 + rng.below(10);
        let n = 2 + rng.below(8);
        let k = 1 + rng.below(n.min(3));
        let objective = [Objective::Mean, Objective::MaxMin, Objective::Cvar][case % 3];
        let params = FairnessParams::new(k, objective)
            .with_gamma([0.0, 0.5, 1.0][rng.below(3)])
            .with_alpha([0.0, 0.5, 0.9][rng.below(3)])
            .with_theta([0.0, 0.3, 0.8][rng.below(3)]);
        let groups = 1 + rng.below(3);
        let p = random_problem(&mut rng, m, n, groups, params);
        match certify(&p) {
            Ok(_) => solved += 1,
            Err(Error::Infeasible(_)) => {}
            Err(e) => panic!("case {case}: {e}"),
        }
    }
    assert!(solved >= 40, "only {solved} feasible cases");
}

#[test]
fn simrec_relaxations_are_certified() {
    let (rho, groups) =
        gen_simrec(&SimRecConfig { m: 90, n: 30, groups: 6, seed: 3, ..SimRecConfig::default() }).unwrap();
    let values = gen_values(&rho, 3, ValueMode::InversePopularity).unwrap();
    for (objective, gamma, theta) in [
        (Objective::Mean, 0.5, 0.0),
        (Objective::Mean, 1.0, 0.3),
        (Objective::Cvar, 0.5, 0.0),
        (Objective::MaxMin, 0.75, 0.2),
    ] {
        let params = FairnessParams::new(3, objective).with_gamma(gamma).with_alpha(0.95).with_theta(theta);
        let p = Problem::new(rho.clone(), groups.clone(), values.clone(), params).unwrap();
        certify(&p).unwrap();
    }
}

#[test]
fn relaxation_bounds_every_binary_allocation() {
    let mut rng = PortableRng::new(5);
    for _ in 0..20 {
        let params = FairnessParams::new(2, Objective::Mean).with_gamma(0.5);
        let p = random_problem(&mut rng, 4, 4, 2, params);
        let bound = certify(&p).unwrap();
        let best = fairtopk_core::oracle::brute_force_solve(&p).unwrap().best_objective;
        assert!(best <= bound + 1e-9);
    }
}
