//! Exhaustive and closed-form references used as ground truth for the solvers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::metrics::{self, top_k_indices};
use crate::program::Family;
use crate::types::{Allocation, Normalization, Objective, Problem, ProducerValues};

/// Largest number of allocations [`brute_force_solve`] will enumerate.
pub const ENUMERATION_GUARD: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_allocation: Allocation,
    /// Utility (maximized) for Mean/MaxMin, CVaR loss (minimized) for CVaR.
    pub best_objective: f64,
    pub enumerated_count: u64,
}

/// Best achievable minimum producer exposure when every consumer takes
/// exactly `k` of `n` producers: `floor(m k / n)`.
///
/// Total exposure is exactly `m k`, and the cyclic assignment
/// `i -> {(i k + t) mod n : t < k}` spreads it with column sums differing by
/// at most one, so the bound is attained.
pub fn producer_fairness_baseline(m: usize, n: usize, k: usize) -> Result<usize> {
    if n == 0 || k == 0 || k > n {
        return Err(invalid(format!("k={k} must satisfy 1 <= k <= n={n}")));
    }
    Ok(m * k / n)
}

/// Maximum of `sum_j v_j exposure_j` over allocations with `k` items per
/// consumer: every consumer takes the `k` most valuable producers.
pub fn gmv_max(values: &ProducerValues, m: usize, k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(invalid(format!("k={k} must satisfy 1 <= k <= n={}", values.len())));
    }
    Ok(m as f64 * metrics::top_k_sum(values.as_slice(), k))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..k).rev().find(|&p| cur[p] < n - k + p) else {
            return out;
        };
        cur[pos] += 1;
        for q in pos + 1..k {
            cur[q] = cur[q - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive search over every per-consumer `k`-subset combination.
///
/// Keeps combinations meeting the producer floor and GMV floor and returns
/// the first optimum in lexicographic order of the per-consumer subsets.
pub fn brute_force_solve(problem: &Problem) -> Result<OracleResult> {
    let (m, n, k) = (problem.m(), problem.n(), problem.params.k);
    let subsets = k_subsets(n, k);
    let combinations = libm::pow(binomial(n, k), m as f64);
    if combinations > ENUMERATION_GUARD {
        return Err(Error::TooLarge { combinations, guard: ENUMERATION_GUARD });
    }

    let params = &problem.params;
    let floor = problem.producer_floor().map(|f| f as u32);
    let gmv_floor = problem.gmv_floor();
    let values = problem.values.as_slice();
    let norm = params.effective_normalization();

    // per consumer, per subset: captured utility and top-k loss
    let score = |mode: Normalization| -> Vec<Vec<f64>> {
        (0..m)
            .map(|i| {
                let row = problem.rho.row(i);
                let denom = metrics::utility_denominator(row, k, mode);
                subsets
                    .iter()
                    .map(|s| if denom <= 0.0 { 1.0 } else { s.iter().map(|&j| row[j]).sum::<f64>() / denom })
                    .collect()
            })
            .collect()
    };
    let util = score(norm);
    let topk_util = if norm == Normalization::TopK { util.clone() } else { score(Normalization::TopK) };
    let subset_value: Vec<f64> = subsets.iter().map(|s| s.iter().map(|&j| values[j]).sum()).collect();

    let groups = &problem.groups;
    let mut choice = vec![0usize; m];
    let mut exposure = vec![0u32; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut floor_ok_seen = false;
    let mut enumerated = 0u64;
    let mut loss_sums = vec![0.0; groups.group_count()];

    loop {
        enumerated += 1;
        exposure.iter_mut().for_each(|e| *e = 0);
        for &c in &choice {
            for &j in &subsets[c] {
                exposure[j] += 1;
            }
        }
        let floor_ok = floor.is_none_or(|f| exposure.iter().all(|&e| e >= f));
        let gmv_ok = gmv_floor.is_none_or(|g| {
            let gmv: f64 = choice.iter().map(|&c| subset_value[c]).sum();
            gmv >= g - 1e-9 * g.abs().max(1.0)
        });
        floor_ok_seen |= floor_ok;
        if floor_ok && gmv_ok {
            // objective in "larger is better" form
            let value = match params.objective {
                Objective::Mean => choice.iter().enumerate().map(|(i, &c)| util[i][c]).sum::<f64>() / m as f64,
                Objective::MaxMin => choice.iter().enumerate().map(|(i, &c)| util[i][c]).fold(f64::INFINITY, f64::min),
                Objective::Cvar => {
                    loss_sums.iter_mut().for_each(|s| *s = 0.0);
                    for (i, &c) in choice.iter().enumerate() {
                        loss_sums[groups.group_of(i)] += 1.0 - topk_util[i][c];
                    }
                    let losses: Vec<f64> = loss_sums.iter().zip(groups.sizes()).map(|(s, &sz)| s / sz as f64).collect();
                    -metrics::cvar_min(&losses, params.alpha)?.0
                }
            };
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, choice.clone()));
            }
        }

        // odometer, last consumer fastest
        let Some(pos) = (0..m).rev().find(|&i| choice[i] + 1 < subsets.len()) else {
            break;
        };
        choice[pos] += 1;
        choice[pos + 1..].iter_mut().for_each(|c| *c = 0);
    }

    let Some((value, choice)) = best else {
        return Err(Error::Infeasible(if floor_ok_seen { Family::Gmv } else { Family::ProducerFloor }));
    };
    let selections: Vec<Vec<usize>> = choice.iter().map(|&c| subsets[c].clone()).collect();
    Ok(OracleResult {
        best_allocation: Allocation::from_selections(n, &selections)?,
        best_objective: if params.objective == Objective::Cvar { -value } else { value },
        enumerated_count: enumerated,
    })
}

/// Brute-force max-min column sum over all binary allocations with `k` items
/// per consumer. Exponential; test and acceptance use only.
pub fn brute_force_baseline(m: usize, n: usize, k: usize) -> usize {
    let subsets = k_subsets(n, k);
    let mut choice = vec![0usize; m];
    let mut best = 0;
    loop {
        let mut exposure = vec![0usize; n];
        for &c in &choice {
            for &j in &subsets[c] {
                exposure[j] += 1;
            }
        }
        best = best.max(exposure.iter().copied().min().unwrap_or(0));
        let Some(pos) = (0..m).rev().find(|&i| choice[i] + 1 < subsets.len()) else {
            return best;
        };
        choice[pos] += 1;
        choice[pos + 1..].iter_mut().for_each(|c| *c = 0);
    }
}

/// Indices of the `k` most relevant producers of every consumer.
pub fn top_k_allocation(problem: &Problem) -> Allocation {
    let sel: Vec<Vec<usize>> = problem.rho.rows().map(|r| top_k_indices(r, problem.params.k)).collect();
    Allocation::from_selections(problem.n(), &sel).expect("indices in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FairnessParams, GroupPartition, RelevanceMatrix};

    fn problem(rows: &[Vec<f64>], params: FairnessParams) -> Problem {
        Problem::ungrouped(RelevanceMatrix::from_rows(rows).unwrap(), params).unwrap()
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(k_subsets(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(k_subsets(3, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn argmax_single_consumer() {
        let p = problem(&[vec![0.2, 0.9, 0.5]], FairnessParams::new(1, Objective::Mean));
        let r = brute_force_solve(&p).unwrap();
        assert_eq!(r.best_allocation.selections(), vec![vec![1]]);
        assert_eq!(r.best_objective, 1.0);
        assert_eq!(r.enumerated_count, 3);
    }

    #[test]
    fn two_by_two_full_fairness() {
        let rows = [vec![0.9, 0.1], vec![0.8, 0.2]];
        let p = problem(&rows, FairnessParams::new(1, Objective::Mean).with_gamma(1.0));
        assert_eq!(p.producer_floor(), Some(1));
        let r = brute_force_solve(&p).unwrap();
        // enumerate the 4 allocations by hand: only the two matchings are feasible
        let a: f64 = (1.0 + 0.2 / 0.8) / 2.0; // 0->0, 1->1
        let b = (0.1 / 0.9 + 1.0) / 2.0; // 0->1, 1->0
        assert!((r.best_objective - a.max(b)).abs() < 1e-12);
        assert_eq!(r.best_allocation.selections(), vec![vec![0], vec![1]]);
    }

    #[test]
    fn infeasible_floor_is_reported() {
        let p = problem(&[vec![0.2, 0.9, 0.5]], FairnessParams::new(1, Objective::Mean).with_floor_override(1));
        assert_eq!(brute_force_solve(&p).unwrap_err(), Error::Infeasible(Family::ProducerFloor));
    }

    #[test]
    fn infeasible_gmv_is_reported() {
        let rho = RelevanceMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let values = ProducerValues::new(vec![1.0, 3.0]).unwrap();
        // floor 1 forces one consumer onto the cheap producer: gmv 4 < 0.9 * 6
        let params = FairnessParams::new(1, Objective::Mean).with_gamma(1.0).with_theta(0.9);
        let p = Problem::new(rho, GroupPartition::single(2), values, params).unwrap();
        assert_eq!(brute_force_solve(&p).unwrap_err(), Error::Infeasible(Family::Gmv));
    }

    #[test]
    fn guard_refuses_large_instances() {
        let rho = RelevanceMatrix::new(10, 10, vec![0.5; 100]).unwrap();
        let p = Problem::ungrouped(rho, FairnessParams::new(3, Objective::Mean)).unwrap();
        assert!(matches!(brute_force_solve(&p), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(producer_fairness_baseline(4, 2, 1).unwrap(), 2);
        assert_eq!(brute_force_baseline(4, 2, 1), 2);
        assert_eq!(producer_fairness_baseline(3, 2, 2).unwrap(), 3);
        assert_eq!(producer_fairness_baseline(5, 3, 2).unwrap(), 3);
        assert_eq!(brute_force_baseline(5, 3, 2), 3);
        assert!(producer_fairness_baseline(3, 2, 3).is_err());
    }

    #[test]
    fn baseline_matches_brute_force_grid() {
        for m in 1..=5 {
            for n in 1..=4 {
                for k in 1..=3.min(n) {
                    assert_eq!(
                        producer_fairness_baseline(m, n, k).unwrap(),
                        brute_force_baseline(m, n, k),
                        "{m} {n} {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn gmv_max_examples() {
        let v = ProducerValues::new(vec![5.0, 3.0, 1.0]).unwrap();
        assert_eq!(gmv_max(&v, 2, 2).unwrap(), 16.0);
        assert_eq!(gmv_max(&ProducerValues::uniform(4), 3, 2).unwrap(), 6.0);
        assert_eq!(gmv_max(&v, 1, 1).unwrap(), 5.0);
    }

    #[test]
    fn gmv_max_matches_enumeration() {
        let v = ProducerValues::new(vec![0.3, 2.0, 1.1, 0.7]).unwrap();
        for n in 1..=4 {
            let vals = ProducerValues::new(v.as_slice()[..n].to_vec()).unwrap();
            for m in 1..=3 {
                for k in 1..=n {
                    let subsets = k_subsets(n, k);
                    let total = subsets.len().pow(m as u32);
                    let mut brute = f64::NEG_INFINITY;
                    for code in 0..total {
                        let mut c = code;
                        let sel: Vec<Vec<usize>> = (0..m)
                            .map(|_| {
                                let s = subsets[c % subsets.len()].clone();
                                c /= subsets.len();
                                s
                            })
                            .collect();
                        let w = Allocation::from_selections(n, &sel).unwrap();
                        brute = brute.max(metrics::gmv_of_allocation(&w, &vals).unwrap());
                    }
                    assert!((gmv_max(&vals, m, k).unwrap() - brute).abs() < 1e-12);
                }
            }
        }
    }
}
