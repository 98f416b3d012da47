//! Utility, loss and constraint metrics evaluated on any allocation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dimension, invalid, Result};
use crate::types::{
    Allocation, FairnessParams, GroupPartition, Normalization, Objective, Problem, ProducerValues, RelevanceMatrix,
    SolveResult, SolverStats, ViolationReport,
};

/// Tolerance for row/column sums when counting violations.
pub const VIOLATION_TOL: f64 = 1e-6;

/// Indices of the `k` largest entries, ties broken by lower index.
pub fn top_k_indices(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn top_k_sum(row: &[f64], k: usize) -> f64 {
    top_k_indices(row, k).iter().map(|&j| row[j]).sum()
}

/// Normalizing denominator of a relevance row.
pub fn utility_denominator(rho_row: &[f64], k: usize, mode: Normalization) -> f64 {
    match mode {
        Normalization::TopK => top_k_sum(rho_row, k),
        Normalization::SingleMax => rho_row.iter().copied().fold(0.0, f64::max),
    }
}

/// Captured relevance of `w_row` normalized by the best achievable relevance.
///
/// An all-zero relevance row counts as fully satisfied and returns 1.
pub fn consumer_utility(rho_row: &[f64], w_row: &[f64], k: usize, mode: Normalization) -> Result<f64> {
    if rho_row.len() != w_row.len() {
        return Err(dimension(format!("relevance row has {} entries, weights {}", rho_row.len(), w_row.len())));
    }
    if k == 0 || k > rho_row.len() {
        return Err(invalid(format!("k={k} must satisfy 1 <= k <= {}", rho_row.len())));
    }
    let denom = utility_denominator(rho_row, k, mode);
    if denom <= 0.0 {
        return Ok(1.0);
    }
    let captured: f64 = rho_row.iter().zip(w_row).map(|(r, w)| r * w).sum();
    Ok(captured / denom)
}

pub fn consumer_utilities(rho: &RelevanceMatrix, w: &Allocation, k: usize, mode: Normalization) -> Result<Vec<f64>> {
    check_shape(rho, w)?;
    rho.rows().zip(w.rows()).map(|(r, wr)| consumer_utility(r, wr, k, mode)).collect()
}

/// Column sums of the allocation.
pub fn producer_exposures(w: &Allocation) -> Vec<f64> {
    let mut exposure = vec![0.0; w.n()];
    for row in w.rows() {
        for (e, &x) in exposure.iter_mut().zip(row) {
            *e += x;
        }
    }
    exposure
}

/// Mean of `values` within each group.
pub fn group_means(values: &[f64], groups: &GroupPartition) -> Vec<f64> {
    let mut sums = vec![0.0; groups.group_count()];
    for (i, &v) in values.iter().enumerate() {
        sums[groups.group_of(i)] += v;
    }
    sums.iter().zip(groups.sizes()).map(|(s, &n)| s / n as f64).collect()
}

/// Mean relevance loss `1 - utility` (top-k normalized) of every group.
pub fn group_losses(rho: &RelevanceMatrix, w: &Allocation, groups: &GroupPartition, k: usize) -> Result<Vec<f64>> {
    if groups.consumer_count() != rho.m() {
        return Err(dimension(format!("{} group labels for m={}", groups.consumer_count(), rho.m())));
    }
    let losses: Vec<f64> = consumer_utilities(rho, w, k, Normalization::TopK)?.into_iter().map(|u| 1.0 - u).collect();
    Ok(group_means(&losses, groups))
}

/// `tau + sum_g max(L_g - tau, 0) / ((1 - alpha) G)`.
pub fn cvar_value(losses: &[f64], tau: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid(format!("alpha={alpha} must lie in [0, 1)")));
    }
    if losses.is_empty() {
        return Err(invalid("cvar of an empty loss vector"));
    }
    let scale = 1.0 / ((1.0 - alpha) * losses.len() as f64);
    Ok(tau + scale * losses.iter().map(|&l| (l - tau).max(0.0)).sum::<f64>())
}

/// Minimum of [`cvar_value`] over `tau >= 0`, with the minimizing `tau`.
///
/// The objective is piecewise linear and convex in `tau`, so the minimum sits
/// at one of the breakpoints `{0} ∪ {L_g}`. Ties keep the smallest `tau`.
pub fn cvar_min(losses: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let mut best = (cvar_value(losses, 0.0, alpha)?, 0.0);
    for &tau in losses.iter().filter(|&&l| l > 0.0) {
        let v = cvar_value(losses, tau, alpha)?;
        if v < best.0 || (v == best.0 && tau < best.1) {
            best = (v, tau);
        }
    }
    Ok(best)
}

/// Value-weighted exposure `sum_j v_j * sum_i w_ij`.
pub fn gmv_of_allocation(w: &Allocation, values: &ProducerValues) -> Result<f64> {
    if values.len() != w.n() {
        return Err(dimension(format!("{} producer values for n={}", values.len(), w.n())));
    }
    Ok(producer_exposures(w).iter().zip(values.as_slice()).map(|(e, v)| e * v).sum())
}

/// Percentages of consumers with a wrong item count, producers under the
/// exposure floor, and whether GMV falls below `gmv_floor`.
pub fn violation_report(
    w: &Allocation,
    params: &FairnessParams,
    producer_floor: usize,
    gmv_floor: f64,
    values: &ProducerValues,
) -> Result<ViolationReport> {
    let k = params.k as f64;
    let row_sums = w.row_sums();
    let under = row_sums.iter().filter(|&&s| s < k - VIOLATION_TOL).count();
    let over = row_sums.iter().filter(|&&s| s > k + VIOLATION_TOL).count();
    let floor = producer_floor as f64;
    let exposures = producer_exposures(w);
    let starved = exposures.iter().filter(|&&e| e < floor - VIOLATION_TOL).count();
    let gmv = gmv_of_allocation(w, values)?;
    let gmv_tol = VIOLATION_TOL * gmv_floor.abs().max(1.0);
    let gmv_violated = gmv < gmv_floor - gmv_tol;
    Ok(ViolationReport {
        under_alloc_pct: pct(under, w.m()),
        over_alloc_pct: pct(over, w.m()),
        producer_violation_pct: pct(starved, w.n()),
        gmv_violated,
        gmv_shortfall: if gmv_violated { gmv_floor - gmv } else { 0.0 },
    })
}

fn pct(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

/// Population variance of the group-mean utilities.
pub fn group_utility_variance(group_utilities: &[f64]) -> f64 {
    let Some(&first) = group_utilities.first() else { return 0.0 };
    if group_utilities.iter().all(|&u| u == first) {
        return 0.0;
    }
    let g = group_utilities.len() as f64;
    let mean = group_utilities.iter().sum::<f64>() / g;
    group_utilities.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / g
}

/// Configured objective evaluated on an allocation: mean or minimum utility,
/// or the CVaR of group losses minimized over `tau`.
pub fn objective_value(problem: &Problem, w: &Allocation) -> Result<f64> {
    let params = &problem.params;
    match params.objective {
        Objective::Mean => {
            let u = consumer_utilities(&problem.rho, w, params.k, params.effective_normalization())?;
            Ok(u.iter().sum::<f64>() / u.len() as f64)
        }
        Objective::MaxMin => {
            let u = consumer_utilities(&problem.rho, w, params.k, params.effective_normalization())?;
            Ok(u.iter().copied().fold(f64::INFINITY, f64::min))
        }
        Objective::Cvar => {
            let losses = group_losses(&problem.rho, w, &problem.groups, params.k)?;
            Ok(cvar_min(&losses, params.alpha)?.0)
        }
    }
}

/// Every reported metric for an allocation. Utilities are top-k normalized.
pub fn assess(problem: &Problem, w: Allocation, stats: SolverStats) -> Result<SolveResult> {
    let k = problem.params.k;
    let consumer_utilities = consumer_utilities(&problem.rho, &w, k, Normalization::TopK)?;
    let group_utilities = group_means(&consumer_utilities, &problem.groups);
    let group_variance = group_utility_variance(&group_utilities);
    let mean_utility = consumer_utilities.iter().sum::<f64>() / consumer_utilities.len() as f64;
    let violations = violation_report(
        &w,
        &problem.params,
        problem.producer_floor().unwrap_or(0),
        problem.gmv_floor().unwrap_or(0.0),
        &problem.values,
    )?;
    let objective_value = objective_value(problem, &w)?;
    Ok(SolveResult {
        allocation: w,
        objective_value,
        mean_utility,
        consumer_utilities,
        group_utilities,
        group_variance,
        violations,
        stats,
    })
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Self { mean, se: libm::sqrt(var / n) }
    }
}

/// Spread of the headline metrics over rounding samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleSpread {
    pub objective_value: MeanSe,
    pub mean_utility: MeanSe,
    pub group_variance: MeanSe,
    pub under_alloc_pct: MeanSe,
    pub over_alloc_pct: MeanSe,
    pub producer_violation_pct: MeanSe,
    /// Fraction of samples whose GMV falls below the floor.
    pub gmv_violation_rate: f64,
}

/// Assesses every sample; the returned result keeps the first sample's
/// allocation and per-consumer detail with the scalar metrics replaced by
/// their means over samples.
pub fn assess_samples(
    problem: &Problem,
    samples: Vec<Allocation>,
    stats: SolverStats,
) -> Result<(SolveResult, SampleSpread)> {
    if samples.is_empty() {
        return Err(invalid("no rounding samples"));
    }
    let count = samples.len();
    let mut results = Vec::with_capacity(count);
    for w in samples {
        results.push(assess(problem, w, stats)?);
    }
    let pick = |f: &dyn Fn(&SolveResult) -> f64| MeanSe::of(&results.iter().map(f).collect::<Vec<_>>());
    let spread = SampleSpread {
        objective_value: pick(&|r| r.objective_value),
        mean_utility: pick(&|r| r.mean_utility),
        group_variance: pick(&|r| r.group_variance),
        under_alloc_pct: pick(&|r| r.violations.under_alloc_pct),
        over_alloc_pct: pick(&|r| r.violations.over_alloc_pct),
        producer_violation_pct: pick(&|r| r.violations.producer_violation_pct),
        gmv_violation_rate: results.iter().filter(|r| r.violations.gmv_violated).count() as f64 / count as f64,
    };
    let mut head = results.swap_remove(0);
    head.objective_value = spread.objective_value.mean;
    head.mean_utility = spread.mean_utility.mean;
    head.group_variance = spread.group_variance.mean;
    head.violations.under_alloc_pct = spread.under_alloc_pct.mean;
    head.violations.over_alloc_pct = spread.over_alloc_pct.mean;
    head.violations.producer_violation_pct = spread.producer_violation_pct.mean;
    head.stats.samples = count as u32;
    Ok((head, spread))
}

fn check_shape(rho: &RelevanceMatrix, w: &Allocation) -> Result<()> {
    if rho.m() != w.m() || rho.n() != w.n() {
        return Err(dimension(format!("relevance is {}x{}, allocation {}x{}", rho.m(), rho.n(), w.m(), w.n())));
    }
    Ok(())
}
