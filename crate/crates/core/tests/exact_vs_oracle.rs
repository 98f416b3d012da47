use fairtopk_core::exact::{solve_exact, ExactLimits};
use fairtopk_core::metrics::objective_value;
use fairtopk_core::oracle::brute_force_solve;
use fairtopk_core::program::{build, Integrality};
use fairtopk_core::rng::PortableRng;
use fairtopk_core::{Error, FairnessParams, GroupPartition, Objective, Problem, ProducerValues, RelevanceMatrix};

fn instance(rng: &mut PortableRng, m: usize, n: usize, params: FairnessParams) -> Problem {
    let rho = RelevanceMatrix::new(m, n, (0..m * n).map(|_| rng.uniform()).collect()).unwrap();
    let g = 1 + rng.below(m.min(2));
    let groups = GroupPartition::new((0..m).map(|i| i % g).collect(), g).unwrap();
    let values = ProducerValues::new((0..n).map(|_| rng.uniform() + 0.05).collect()).unwrap();
    Problem::new(rho, groups, values, params).unwrap()
}

fn exact(p: &Problem) -> Result<fairtopk_core::SolveResult, Error> {
    solve_exact(&build(p, Integrality::Binary)?, &ExactLimits::default())
}

#[test]
fn exact_matches_enumeration_with_gmv_floors() {
    let mut rng = PortableRng::new(2024);
    let (mut agreed, mut infeasible) = (0, 0);
    for case in 0..80 {
        let m = 1 + rng.below(3);
        let n = 2 + rng.below(3);
        let k = 1 + rng.below(2.min(n));
        let objective = [Objective::Mean, Objective::MaxMin, Objective::Cvar][case % 3];
        let params = FairnessParams::new(k, objective)
            .with_gamma([0.0, 0.5, 1.0][rng.below(3)])
            .with_alpha([0.0, 0.5, 0.8][rng.below(3)])
            .with_theta([0.0, 0.5, 0.9][rng.below(3)]);
        let p = instance(&mut rng, m, n, params);
        match (brute_force_solve(&p), exact(&p)) {
            (Ok(o), Ok(r)) => {
                assert!((o.best_objective - r.objective_value).abs() < 1e-9, "case {case}");
                assert!((objective_value(&p, &r.allocation).unwrap() - r.objective_value).abs() < 1e-12);
                assert!(r.violations.is_clean(), "case {case}: {:?}", r.violations);
                agreed += 1;
            }
            (Err(Error::Infeasible(a)), Err(Error::Infeasible(b))) => {
                assert_eq!(a, b, "case {case}");
                infeasible += 1;
            }
            (o, r) => panic!("case {case}: oracle {o:?} exact {r:?}"),
        }
    }
    assert!(agreed > 50 && infeasible > 0, "{agreed} agreed, {infeasible} infeasible");
}

#[test]
fn utility_is_nonincreasing_in_gamma() {
    let mut rng = PortableRng::new(8);
    for _ in 0..5 {
        let p = instance(&mut rng, 12, 6, FairnessParams::new(2, Objective::Mean));
        let mut last = f64::INFINITY;
        for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let r = exact(&p.with_params(p.params.clone().with_gamma(gamma)).unwrap()).unwrap();
            assert!(r.mean_utility <= last + 1e-9);
            last = r.mean_utility;
        }
    }
}

#[test]
fn node_cap_returns_an_incumbent_with_a_gap() {
    let mut rng = PortableRng::new(77);
    let params = FairnessParams::new(3, Objective::Cvar).with_gamma(0.5).with_alpha(0.9);
    let rho = RelevanceMatrix::new(40, 12, (0..480).map(|_| rng.uniform()).collect()).unwrap();
    let groups = GroupPartition::new((0..40).map(|i| i % 5).collect(), 5).unwrap();
    let p = Problem::new(rho, groups, ProducerValues::uniform(12), params).unwrap();
    let limits = ExactLimits { node_cap: 3, ..ExactLimits::default() };
    match solve_exact(&build(&p, Integrality::Binary).unwrap(), &limits) {
        Ok(r) => {
            assert!(r.allocation.is_binary() && r.violations.is_clean());
            if r.stats.caps_hit {
                assert!(r.stats.gap.is_some());
            }
        }
        Err(Error::NoSolution { best_bound }) => assert!(best_bound.is_finite()),
        Err(e) => panic!("{e}"),
    }
}
