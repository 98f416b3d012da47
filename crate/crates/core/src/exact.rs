//! Depth-first branch and bound over the binary weights, bounded by the LP
//! relaxation and warm-started with dual simplex at every child.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lp::{diagnose_infeasibility, round_topk_weights, LpEngine};
use crate::metrics;
use crate::program::{Sense, StandardProgram};
use crate::simplex::{BasisSnapshot, DualOutcome};
use crate::types::{Allocation, SolveResult, SolverStats};

/// Distance from an integer below which a weight counts as integral.
const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ExactLimits {
    pub node_cap: u64,
    /// Seconds; only enforced with the `std` feature.
    pub time_cap_s: f64,
    /// Relative optimality gap at which a subtree is pruned.
    pub gap_tolerance: f64,
}

impl Default for ExactLimits {
    fn default() -> Self {
        Self { node_cap: 1_000_000, time_cap_s: 300.0, gap_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BnBStats {
    pub nodes: u64,
    pub lp_solves: u64,
    pub pivots: u64,
    /// Best bound on the optimum, in the program's sense.
    pub best_bound: f64,
    pub best_incumbent: f64,
    pub gap: f64,
    pub wall_time_s: f64,
    pub caps_hit: bool,
}

struct Clock {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

struct Pending {
    fixings: Vec<(usize, f64)>,
    basis: BasisSnapshot,
    /// Parent LP bound (internal minimization form).
    bound: f64,
}

struct Search<'a> {
    program: &'a StandardProgram,
    engine: LpEngine,
    sign: f64,
    incumbent: Option<(f64, Vec<f64>)>,
    /// Smallest bound among subtrees pruned only by the gap tolerance.
    pruned_bound: f64,
    stats: BnBStats,
    limits: ExactLimits,
}

impl Search<'_> {
    fn cutoff(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(v, _)| v - self.limits.gap_tolerance * v.abs().max(1e-9))
    }

    /// Offers a binary weight matrix as incumbent; returns true if accepted.
    fn offer(&mut self, w: &[f64]) -> bool {
        let x = self.program.complete(w);
        if self.program.first_violation(&x, 1e-9).is_some() {
            return false;
        }
        let value = self.sign * self.program.objective_at(&x);
        if self.incumbent.as_ref().is_none_or(|(v, _)| value < *v) {
            self.incumbent = Some((value, w.to_vec()));
            return true;
        }
        false
    }

    fn heuristic(&mut self, values: &[f64]) {
        let lay = &self.program.layout;
        let w = Allocation::from_solver(lay.m, lay.n, &values[..lay.weight_count()]);
        if let Ok(rounded) = round_topk_weights(&w, self.program.problem.params.k) {
            self.offer(rounded.as_slice());
        }
    }

    /// Most fractional integer variable, ties to the lowest index.
    fn branching_variable(&self, values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (v, &x) in values.iter().enumerate() {
            if !self.program.integer[v] {
                continue;
            }
            let frac = libm::fabs(x - libm::round(x));
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f + 1e-12) {
                best = Some((v, frac));
            }
        }
        best.map(|(v, _)| v)
    }

    /// LP bound in internal minimization form including the offset.
    fn node_bound(&self) -> f64 {
        self.engine.min_objective() + self.sign * self.program.offset
    }

    fn explore(&mut self, clock: &Clock) -> Result<()> {
        let n_vars = self.program.num_vars();
        let original: Vec<(f64, f64)> = (0..n_vars).map(|v| self.engine.simplex.bounds(v)).collect();
        let mut stack: Vec<Pending> = Vec::new();
        let mut current: Vec<(usize, f64)> = Vec::new();
        let mut solved_current = true; // root solved by the caller
        let mut current_bound = self.node_bound();

        loop {
            if self.stats.nodes >= self.limits.node_cap || clock.elapsed() > self.limits.time_cap_s {
                self.stats.caps_hit = true;
                let open = stack.iter().map(|p| p.bound).fold(f64::INFINITY, f64::min);
                self.pruned_bound = self.pruned_bound.min(open).min(current_bound);
                return Ok(());
            }
            self.stats.nodes += 1;

            let feasible = if solved_current {
                true
            } else {
                self.stats.lp_solves += 1;
                let cutoff = self.cutoff().map(|c| c - self.sign * self.program.offset);
                match self.engine.simplex.reoptimize(cutoff)? {
                    DualOutcome::Optimal => true,
                    DualOutcome::Infeasible => false,
                    DualOutcome::Cutoff => {
                        self.pruned_bound = self.pruned_bound.min(self.node_bound());
                        false
                    }
                    DualOutcome::Stalled => {
                        // fall back to a cold solve of this node
                        let mut fresh = LpEngine::new(self.program);
                        for &(v, val) in &current {
                            fresh.simplex.set_bounds(v, val, val);
                        }
                        fresh.simplex.sync();
                        let ok = fresh.simplex.solve()?;
                        self.engine = fresh;
                        ok
                    }
                }
            };

            let mut branched = false;
            if feasible {
                let bound = self.node_bound();
                let values = self.engine.simplex.values()[..n_vars].to_vec();
                let pruned = self.cutoff().is_some_and(|c| bound >= c);
                if pruned {
                    self.pruned_bound = self.pruned_bound.min(bound);
                } else if let Some(v) = self.branching_variable(&values) {
                    self.heuristic(&values);
                    // the heuristic may have raised the cutoff
                    if self.cutoff().is_some_and(|c| bound >= c) {
                        self.pruned_bound = self.pruned_bound.min(bound);
                    } else {
                        let basis = self.engine.simplex.snapshot();
                        // toward one first
                        let (first, second) = (1.0, 0.0);
                        let mut later = current.clone();
                        later.push((v, second));
                        stack.push(Pending { fixings: later, basis, bound });
                        current.push((v, first));
                        self.engine.simplex.set_bounds(v, first, first);
                        self.engine.simplex.sync();
                        solved_current = false;
                        current_bound = bound;
                        branched = true;
                    }
                } else {
                    let lay = &self.program.layout;
                    let w: Vec<f64> = values[..lay.weight_count()].iter().map(|x| libm::round(*x)).collect();
                    self.offer(&w);
                }
            }
            if branched {
                continue;
            }

            let Some(next) = stack.pop() else {
                return Ok(());
            };
            for &(v, _) in &current {
                let (l, u) = original[v];
                self.engine.simplex.set_bounds(v, l, u);
            }
            for &(v, val) in &next.fixings {
                self.engine.simplex.set_bounds(v, val, val);
            }
            self.engine.simplex.restore(&next.basis)?;
            current = next.fixings;
            current_bound = next.bound;
            solved_current = false;
        }
    }
}

/// Solves a binary program to within the gap tolerance, or returns the best
/// incumbent with `caps_hit` set when limits stop the search.
pub fn solve_exact(program: &StandardProgram, limits: &ExactLimits) -> Result<SolveResult> {
    let (w, bnb) = solve_exact_raw(program, limits)?;
    let stats = SolverStats {
        iterations: bnb.pivots,
        nodes: bnb.nodes,
        lp_solves: bnb.lp_solves,
        best_bound: Some(bnb.best_bound),
        gap: Some(bnb.gap),
        wall_time_s: bnb.wall_time_s,
        caps_hit: bnb.caps_hit,
        samples: 0,
    };
    metrics::assess(&program.problem, w, stats)
}

/// Branch and bound returning the allocation and search statistics.
pub fn solve_exact_raw(program: &StandardProgram, limits: &ExactLimits) -> Result<(Allocation, BnBStats)> {
    let clock = Clock::start();
    let sign = if program.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut engine = LpEngine::new(program);
    if !engine.simplex.solve()? {
        return Err(Error::Infeasible(diagnose_infeasibility(program)));
    }
    let mut search = Search {
        program,
        engine,
        sign,
        incumbent: None,
        pruned_bound: f64::INFINITY,
        stats: BnBStats { lp_solves: 1, ..BnBStats::default() },
        limits: *limits,
    };
    let root_values = search.engine.simplex.values()[..program.num_vars()].to_vec();
    search.heuristic(&root_values);
    search.explore(&clock)?;

    let pivots = search.engine.simplex.iterations;
    let mut stats = search.stats;
    stats.pivots = pivots;
    stats.wall_time_s = clock.elapsed();
    let Some((value, w)) = search.incumbent else {
        if stats.caps_hit {
            return Err(Error::NoSolution { best_bound: sign * search.pruned_bound });
        }
        return Err(Error::Infeasible(diagnose_infeasibility(program)));
    };
    let bound = search.pruned_bound.min(value);
    stats.best_incumbent = sign * value;
    stats.best_bound = sign * bound;
    stats.gap = (value - bound) / value.abs().max(1e-9);
    let lay = &program.layout;
    Ok((Allocation::from_solver(lay.m, lay.n, &w), stats))
}
