//! LP relaxation solver and the three binarization schemes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::metrics::top_k_indices;
use crate::program::{crash_selection, Family, RowKind, Sense, StandardProgram};
use crate::rng::PortableRng;
use crate::simplex::{LpModel, Simplex};
use crate::types::Allocation;

/// Default number of probabilistic rounding samples.
pub const DEFAULT_ROUNDING_SAMPLES: u32 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution {
    pub weights: Allocation,
    /// Every program variable, weights first.
    pub values: Vec<f64>,
    /// Objective in the program's own sense, offset included.
    pub objective: f64,
    /// Row duals in the program's sense (one per program row).
    pub duals: Vec<f64>,
    /// Basic solution returned by the simplex path.
    pub vertex: bool,
    pub iterations: u64,
}

/// Translates a program into equality form with one slack per inequality.
pub(crate) fn to_model(program: &StandardProgram) -> LpModel {
    let nv = program.num_vars();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
    for (r, row) in program.rows.iter().enumerate() {
        for &(v, a) in &row.coeffs {
            if a != 0.0 {
                cols[v].push((r, a));
            }
        }
    }
    let sign = if program.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut cost: Vec<f64> = program.objective.iter().map(|c| sign * c).collect();
    let mut lower = program.lower.clone();
    let mut upper = program.upper.clone();
    let mut row_slack = vec![None; program.rows.len()];
    for (r, row) in program.rows.iter().enumerate() {
        let (lo, hi) = row.coeffs.iter().fold((0.0, 0.0), |(lo, hi), &(v, a)| {
            let (p, q) = (a * program.lower[v], a * program.upper[v]);
            (lo + p.min(q), hi + p.max(q))
        });
        let (coef, cap) = match row.kind {
            RowKind::Eq => continue,
            RowKind::Ge => (-1.0, hi - row.rhs),
            RowKind::Le => (1.0, row.rhs - lo),
        };
        row_slack[r] = Some(cols.len());
        cols.push(vec![(r, coef)]);
        cost.push(0.0);
        lower.push(0.0);
        upper.push(cap.max(0.0));
    }
    LpModel {
        rows: program.rows.len(),
        cols,
        cost,
        lower,
        upper,
        rhs: program.rows.iter().map(|r| r.rhs).collect(),
        row_slack,
    }
}

/// Solver state kept by branch and bound between node solves.
pub(crate) struct LpEngine {
    pub simplex: Simplex,
    sense_sign: f64,
}

impl LpEngine {
    pub fn new(program: &StandardProgram) -> Self {
        let model = to_model(program);
        let sense_sign = if program.sense == Sense::Maximize { -1.0 } else { 1.0 };
        Self { simplex: Simplex::new(model, &crash_selection(program)), sense_sign }
    }

    /// Internal minimization objective.
    pub fn min_objective(&self) -> f64 {
        self.simplex.objective()
    }

    pub fn solution(&self, program: &StandardProgram) -> FractionalSolution {
        let values = self.simplex.values()[..program.num_vars()].to_vec();
        let objective = program.objective_at(&values);
        let duals = self.simplex.phase_two_duals().into_iter().map(|y| self.sense_sign * y).collect();
        FractionalSolution {
            weights: program.allocation(&values),
            values,
            objective,
            duals,
            vertex: true,
            iterations: self.simplex.iterations,
        }
    }
}

/// Which family makes a program infeasible: floors alone, or the GMV row.
pub(crate) fn diagnose_infeasibility(program: &StandardProgram) -> Family {
    if program.gmv_floor.is_none() {
        return Family::ProducerFloor;
    }
    let mut reduced = program.clone();
    reduced.rows.retain(|r| r.family != Family::Gmv);
    let mut engine = LpEngine::new(&reduced);
    match engine.simplex.solve() {
        Ok(true) => Family::Gmv,
        _ => Family::ProducerFloor,
    }
}

/// Optimal basic solution of the relaxation of `program` (integrality ignored).
pub fn solve_lp(program: &StandardProgram) -> Result<FractionalSolution> {
    let mut engine = LpEngine::new(program);
    if !engine.simplex.solve()? {
        return Err(Error::Infeasible(diagnose_infeasibility(program)));
    }
    Ok(engine.solution(program))
}

/// Selects every entry with weight at least one half. No repair.
pub fn round_hard(frac: &FractionalSolution) -> Allocation {
    let w = &frac.weights;
    let bits = w.as_slice().iter().map(|&x| if x >= 0.5 { 1.0 } else { 0.0 }).collect();
    Allocation::new(w.m(), w.n(), bits).expect("binary entries")
}

/// Independent Bernoulli draws with success probability equal to each weight.
/// Sample `s` draws entry `(i, j)` from the substream of `(seed, s)`.
pub fn round_prob(frac: &FractionalSolution, seed: u64, samples: u32) -> Result<Vec<Allocation>> {
    if samples < 1 {
        return Err(invalid(format!("samples={samples} must be at least 1")));
    }
    let w = &frac.weights;
    Ok((0..samples)
        .map(|s| {
            let mut rng = PortableRng::substream(seed, s as u64);
            let bits = w.as_slice().iter().map(|&p| if rng.bernoulli(p) { 1.0 } else { 0.0 }).collect();
            Allocation::new(w.m(), w.n(), bits).expect("binary entries")
        })
        .collect())
}

/// Keeps the `k` largest weights of every row, ties to the lower index.
pub fn round_topk(frac: &FractionalSolution, k: usize) -> Result<Allocation> {
    round_topk_weights(&frac.weights, k)
}

pub fn round_topk_weights(w: &Allocation, k: usize) -> Result<Allocation> {
    if k == 0 || k > w.n() {
        return Err(invalid(format!("k={k} must satisfy 1 <= k <= n={}", w.n())));
    }
    let sel: Vec<Vec<usize>> = w.rows().map(|r| top_k_indices(r, k)).collect();
    Allocation::from_selections(w.n(), &sel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{build, Integrality};
    use crate::types::{FairnessParams, Objective, Problem, RelevanceMatrix};

    fn frac(rows: &[Vec<f64>]) -> FractionalSolution {
        let m = rows.len();
        let n = rows[0].len();
        let weights = Allocation::new(m, n, rows.concat()).unwrap();
        FractionalSolution {
            values: weights.as_slice().to_vec(),
            weights,
            objective: 0.0,
            duals: Vec::new(),
            vertex: false,
            iterations: 0,
        }
    }

    #[test]
    fn hard_threshold_examples() {
        let f = frac(&[vec![0.5, 0.5, 0.0], vec![0.4, 0.4, 0.2]]);
        let r = round_hard(&f);
        assert_eq!(r.selections(), vec![vec![0, 1], vec![]]);
        let integral = frac(&[vec![1.0, 0.0, 1.0]]);
        assert_eq!(round_hard(&integral), integral.weights);
    }

    #[test]
    fn topk_examples() {
        let f = frac(&[vec![0.7, 0.7, 0.6]]);
        assert_eq!(round_topk(&f, 2).unwrap().selections(), vec![vec![0, 1]]);
        let integral = frac(&[vec![0.0, 1.0, 1.0]]);
        assert_eq!(round_topk(&integral, 2).unwrap(), integral.weights);
    }

    #[test]
    fn prob_rounding_examples() {
        let integral = frac(&[vec![0.0, 1.0, 1.0]]);
        for s in round_prob(&integral, 3, 5).unwrap() {
            assert_eq!(s, integral.weights);
        }
        assert!(round_prob(&integral, 3, 0).is_err());

        let half = frac(&[vec![0.5]]);
        let draws = round_prob(&half, 11, 10_000).unwrap();
        let mean = draws.iter().map(|a| a.get(0, 0)).sum::<f64>() / 10_000.0;
        assert!((0.48..=0.52).contains(&mean), "{mean}");

        let a = round_prob(&half, 99, 50).unwrap();
        let b = round_prob(&half, 99, 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_relaxation_is_integral_top_k() {
        let rho = RelevanceMatrix::from_rows(&[vec![0.9, 0.5, 0.1], vec![0.2, 0.7, 0.4]]).unwrap();
        let p = Problem::ungrouped(rho, FairnessParams::new(1, Objective::Mean)).unwrap();
        let sol = solve_lp(&build(&p, Integrality::Relaxed).unwrap()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!(sol.weights.is_binary());
        assert!(sol.vertex);
    }

    #[test]
    fn floor_forces_second_choice() {
        let rho = RelevanceMatrix::from_rows(&[vec![0.9, 0.1], vec![0.8, 0.2]]).unwrap();
        let p = Problem::ungrouped(rho, FairnessParams::new(1, Objective::Mean).with_gamma(1.0)).unwrap();
        let sol = solve_lp(&build(&p, Integrality::Relaxed).unwrap()).unwrap();
        let best = (1.0 + 0.2 / 0.8) / 2.0;
        assert!((sol.objective - best).abs() < 1e-9, "{}", sol.objective);
        assert!(sol.weights.max_fractionality() < 1e-9);
    }

    #[test]
    fn infeasible_floor() {
        let rho = RelevanceMatrix::from_rows(&[vec![0.2, 0.9, 0.5]]).unwrap();
        let p = Problem::ungrouped(rho, FairnessParams::new(1, Objective::Mean).with_floor_override(1)).unwrap();
        let err = solve_lp(&build(&p, Integrality::Relaxed).unwrap()).unwrap_err();
        assert_eq!(err, Error::Infeasible(Family::ProducerFloor));
    }
}
