//! Domain types shared by the solvers, the generator and the simulator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dimension, invalid, Error, Result};

/// Tolerance used to decide whether an allocation entry is binary.
pub const BINARY_TOL: f64 = 1e-9;

/// Dense row-major consumer x producer relevance scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RelevanceMatrix {
    m: usize,
    n: usize,
    scores: Vec<f64>,
}

impl RelevanceMatrix {
    pub fn new(m: usize, n: usize, scores: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(invalid("relevance matrix needs at least one consumer and one producer"));
        }
        if scores.len() != m * n {
            return Err(dimension(format!("expected {} scores for a {m}x{n} matrix, got {}", m * n, scores.len())));
        }
        for (idx, &value) in scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange { row: idx / n, col: idx % n, value });
            }
        }
        Ok(Self { m, n, scores })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(dimension(format!("row {bad} has {} entries, expected {n}", rows[bad].len())));
        }
        Self::new(m, n, rows.concat())
    }

    /// Consumer count.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Producer count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.scores.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }
}

/// Allocation weights, fractional while solving and binary after rounding.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Allocation {
    m: usize,
    n: usize,
    weights: Vec<f64>,
    binary: bool,
}

impl Allocation {
    pub fn new(m: usize, n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != m * n {
            return Err(dimension(format!(
                "expected {} weights for a {m}x{n} allocation, got {}",
                m * n,
                weights.len()
            )));
        }
        for (idx, &value) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange { row: idx / n, col: idx % n, value });
            }
        }
        let binary = weights.iter().all(|&w| is_binary_value(w));
        Ok(Self { m, n, weights, binary })
    }

    /// Builds an allocation from solver output, clamping entries into `[0, 1]`
    /// and snapping values within [`BINARY_TOL`] of 0 or 1.
    pub fn from_solver(m: usize, n: usize, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), m * n);
        let weights: Vec<f64> = weights
            .iter()
            .map(|&w| {
                let w = w.clamp(0.0, 1.0);
                if w < BINARY_TOL {
                    0.0
                } else if w > 1.0 - BINARY_TOL {
                    1.0
                } else {
                    w
                }
            })
            .collect();
        let binary = weights.iter().all(|&w| is_binary_value(w));
        Self { m, n, weights, binary }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self { m, n, weights: vec![0.0; m * n], binary: true }
    }

    /// Binary allocation selecting the listed producers for each consumer.
    pub fn from_selections(n: usize, selections: &[Vec<usize>]) -> Result<Self> {
        let m = selections.len();
        let mut weights = vec![0.0; m * n];
        for (i, chosen) in selections.iter().enumerate() {
            for &j in chosen {
                if j >= n {
                    return Err(dimension(format!("producer {j} out of range for n={n}")));
                }
                weights[i * n + j] = 1.0;
            }
        }
        Ok(Self { m, n, weights, binary: true })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Indices of the selected producers per consumer (entries above one half).
    pub fn selections(&self) -> Vec<Vec<usize>> {
        self.rows().map(|r| r.iter().enumerate().filter(|(_, &w)| w > 0.5).map(|(j, _)| j).collect()).collect()
    }

    /// Largest distance of any entry from its nearest integer.
    pub fn max_fractionality(&self) -> f64 {
        self.weights.iter().map(|&w| libm::fabs(w - libm::round(w))).fold(0.0, f64::max)
    }
}

fn is_binary_value(w: f64) -> bool {
    w.abs() <= BINARY_TOL || (w - 1.0).abs() <= BINARY_TOL
}

/// Assignment of every consumer to exactly one of `G` nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupPartition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupPartition {
    pub fn new(labels: Vec<usize>, group_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("group partition needs at least one consumer"));
        }
        let mut sizes = vec![0usize; group_count];
        for (i, &g) in labels.iter().enumerate() {
            if g >= group_count {
                return Err(invalid(format!("consumer {i} has label {g} but G={group_count}")));
            }
            sizes[g] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(invalid(format!("group {empty} has no members")));
        }
        Ok(Self { labels, sizes })
    }

    /// Contiguous blocks: the first `sizes[0]` consumers form group 0, and so on.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let labels = sizes.iter().enumerate().flat_map(|(g, &s)| core::iter::repeat_n(g, s)).collect();
        Self::new(labels, sizes.len())
    }

    /// Every consumer in its own group.
    pub fn identity(m: usize) -> Self {
        Self { labels: (0..m).collect(), sizes: vec![1; m] }
    }

    /// All consumers in a single group.
    pub fn single(m: usize) -> Self {
        Self { labels: vec![0; m], sizes: vec![m] }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn consumer_count(&self) -> usize {
        self.labels.len()
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.labels[i]
    }
}

/// Nonnegative per-producer values (price or margin).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProducerValues(Vec<f64>);

impl ProducerValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!("producer value {} at {bad} must be finite and nonnegative", values[bad])));
        }
        if !values.iter().any(|&v| v > 0.0) {
            return Err(invalid("at least one producer value must be positive"));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Objective {
    /// Maximize the worst consumer utility.
    MaxMin,
    /// Maximize mean consumer utility.
    Mean,
    /// Minimize the CVaR of group relevance losses.
    Cvar,
}

/// Denominator used when normalizing a consumer's captured relevance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Normalization {
    /// Sum of the k largest relevances of the row.
    TopK,
    /// Largest relevance of the row.
    SingleMax,
}

/// Objective and constraint parameters of one allocation problem.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FairnessParams {
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub theta: f64,
    pub objective: Objective,
    /// Overrides the per-objective default normalization.
    pub normalization: Option<Normalization>,
    /// Forces the producer exposure floor instead of deriving it from `gamma`.
    pub floor_override: Option<usize>,
}

impl FairnessParams {
    pub fn new(k: usize, objective: Objective) -> Self {
        Self { k, gamma: 0.0, alpha: 0.0, theta: 0.0, objective, normalization: None, floor_override: None }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = Some(normalization);
        self
    }

    pub fn with_floor_override(mut self, floor: usize) -> Self {
        self.floor_override = Some(floor);
        self
    }

    /// MaxMin normalizes by the row maximum, Mean and CVaR by the top-k sum.
    pub fn effective_normalization(&self) -> Normalization {
        self.normalization.unwrap_or(match self.objective {
            Objective::MaxMin => Normalization::SingleMax,
            Objective::Mean | Objective::Cvar => Normalization::TopK,
        })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(invalid(format!("k={} must satisfy 1 <= k <= n={n}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid(format!("gamma={} must lie in [0, 1]", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha={} must lie in [0, 1)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(invalid(format!("theta={} must lie in [0, 1]", self.theta)));
        }
        Ok(())
    }
}

/// Validated bundle of everything needed to pose one allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub rho: RelevanceMatrix,
    pub groups: GroupPartition,
    pub values: ProducerValues,
    pub params: FairnessParams,
}

impl Problem {
    pub fn new(
        rho: RelevanceMatrix,
        groups: GroupPartition,
        values: ProducerValues,
        params: FairnessParams,
    ) -> Result<Self> {
        params.validate(rho.n())?;
        if groups.consumer_count() != rho.m() {
            return Err(dimension(format!(
                "group labels cover {} consumers, relevance has {}",
                groups.consumer_count(),
                rho.m()
            )));
        }
        if values.len() != rho.n() {
            return Err(dimension(format!("{} producer values for n={}", values.len(), rho.n())));
        }
        Ok(Self { rho, groups, values, params })
    }

    /// Problem without group structure or business values.
    pub fn ungrouped(rho: RelevanceMatrix, params: FairnessParams) -> Result<Self> {
        let m = rho.m();
        let n = rho.n();
        Self::new(rho, GroupPartition::single(m), ProducerValues::uniform(n), params)
    }

    pub fn m(&self) -> usize {
        self.rho.m()
    }

    pub fn n(&self) -> usize {
        self.rho.n()
    }

    pub fn with_params(&self, params: FairnessParams) -> Result<Self> {
        Self::new(self.rho.clone(), self.groups.clone(), self.values.clone(), params)
    }

    /// Integer exposure floor enforced on every producer, `None` when `gamma` is 0.
    pub fn producer_floor(&self) -> Option<usize> {
        if let Some(f) = self.params.floor_override {
            return Some(f);
        }
        if self.params.gamma <= 0.0 {
            return None;
        }
        let baseline = crate::oracle::producer_fairness_baseline(self.m(), self.n(), self.params.k)
            .expect("k validated against n");
        Some(ceil_tolerant(self.params.gamma * baseline as f64) as usize)
    }

    /// Minimum GMV enforced, `None` when `theta` is 0.
    pub fn gmv_floor(&self) -> Option<f64> {
        if self.params.theta <= 0.0 {
            return None;
        }
        let vmax = crate::oracle::gmv_max(&self.values, self.m(), self.params.k).expect("k validated");
        Some(self.params.theta * vmax)
    }
}

/// `ceil` that ignores floating noise just above an integer.
pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    libm::ceil(x - 1e-9)
}

/// Constraint violations measured on an allocation, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViolationReport {
    pub under_alloc_pct: f64,
    pub over_alloc_pct: f64,
    pub producer_violation_pct: f64,
    pub gmv_violated: bool,
    /// How far GMV falls short of its floor (0 when satisfied).
    pub gmv_shortfall: f64,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.under_alloc_pct == 0.0
            && self.over_alloc_pct == 0.0
            && self.producer_violation_pct == 0.0
            && !self.gmv_violated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverStats {
    /// Simplex pivots or gradient steps.
    pub iterations: u64,
    /// Branch-and-bound nodes explored.
    pub nodes: u64,
    pub lp_solves: u64,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub wall_time_s: f64,
    /// Set when node or time caps stopped the search early.
    pub caps_hit: bool,
    /// Rounding samples averaged into the metrics (probabilistic rounding).
    pub samples: u32,
}

/// A binary allocation together with every metric reported for it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveResult {
    pub allocation: Allocation,
    pub objective_value: f64,
    pub mean_utility: f64,
    pub consumer_utilities: Vec<f64>,
    pub group_utilities: Vec<f64>,
    pub group_variance: f64,
    pub violations: ViolationReport,
    pub stats: SolverStats,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relevance_rejects_out_of_range_with_coordinates() {
        let mut scores = vec![0.5; 4 * 8];
        scores[3 * 8 + 7] = 1.5;
        let err = RelevanceMatrix::new(4, 8, scores).unwrap_err();
        assert_eq!(err, Error::OutOfRange { row: 3, col: 7, value: 1.5 });
    }

    #[test]
    fn binary_flag_tracks_entries() {
        let a = Allocation::new(1, 3, vec![1.0, 0.0, 1.0 - 1e-12]).unwrap();
        assert!(a.is_binary());
        let b = Allocation::new(1, 3, vec![1.0, 0.5, 0.0]).unwrap();
        assert!(!b.is_binary());
        assert!(Allocation::new(1, 2, vec![1.2, 0.0]).is_err());
    }

    #[test]
    fn partition_rejects_empty_group() {
        assert!(GroupPartition::new(vec![0, 0, 2], 3).is_err());
        let p = GroupPartition::new(vec![1, 0, 1], 2).unwrap();
        assert_eq!(p.sizes(), &[1, 2]);
    }

    #[test]
    fn params_validation() {
        assert!(FairnessParams::new(0, Objective::Mean).validate(3).is_err());
        assert!(FairnessParams::new(4, Objective::Mean).validate(3).is_err());
        assert!(FairnessParams::new(2, Objective::Cvar).with_alpha(1.0).validate(3).is_err());
        assert!(FairnessParams::new(2, Objective::Mean).with_gamma(1.1).validate(3).is_err());
        assert!(FairnessParams::new(3, Objective::Cvar).with_alpha(0.95).with_theta(1.0).validate(3).is_ok());
    }

    #[test]
    fn values_need_a_positive_entry() {
        assert!(ProducerValues::new(vec![0.0, 0.0]).is_err());
        assert!(ProducerValues::new(vec![0.0, -1.0, 2.0]).is_err());
        assert!(ProducerValues::new(vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn floor_rounds_up_gamma_times_baseline() {
        let rho = RelevanceMatrix::new(2, 3, vec![0.5; 6]).unwrap();
        let p = Problem::ungrouped(rho.clone(), FairnessParams::new(1, Objective::Mean).with_gamma(0.5)).unwrap();
        assert_eq!(p.producer_floor(), Some(0));
        let p = Problem::ungrouped(rho, FairnessParams::new(1, Objective::Mean)).unwrap();
        assert_eq!(p.producer_floor(), None);
        let rho = RelevanceMatrix::new(300, 100, vec![0.5; 30000]).unwrap();
        let p = Problem::ungrouped(rho, FairnessParams::new(5, Objective::Mean).with_gamma(0.5)).unwrap();
        assert_eq!(p.producer_floor(), Some(8));
    }
}
