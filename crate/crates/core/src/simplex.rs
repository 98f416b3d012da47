//! Bounded-variable revised simplex on `min c.x, A x = b, l <= x <= u`.
//!
//! The basis inverse is kept dense and updated in product form, with a fresh
//! Gauss-Jordan factorization every few hundred pivots. Columns are sparse.
//! Every row owns an artificial column; artificials start basic where the
//! crash point leaves a residual, drive phase one, and are then fixed at 0.

#![allow(clippy::needless_range_loop)]

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
const COST_PERTURBATION: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Basic(usize),
    Lower,
    Upper,
}

/// Equality-form LP with sparse columns and boxed variables.
#[derive(Debug, Clone)]
pub(crate) struct LpModel {
    pub rows: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Column acting as slack of each row, if any.
    pub row_slack: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BasisSnapshot {
    basis: Vec<usize>,
    status: Vec<Status>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DualOutcome {
    Optimal,
    Infeasible,
    Cutoff,
    Stalled,
}

pub(crate) struct Simplex {
    rows: usize,
    /// Structural plus slack columns; artificials follow.
    structural: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// Row-wise copy of `cols`.
    row_index: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    binv: Vec<f64>,
    /// Costs seen by the dual simplex and its reduced costs.
    work: Vec<f64>,
    d: Vec<f64>,
    /// Bound on how far perturbation can move the optimum of `work`.
    work_slack: f64,
    since_refactor: usize,
    refactor_period: usize,
    pub iterations: u64,
}

impl Simplex {
    /// Starts from the point with `at_upper` columns at their upper bound and
    /// every other nonbasic column at its lower bound.
    pub fn new(model: LpModel, at_upper: &[usize]) -> Self {
        let rows = model.rows;
        let structural = model.cols.len();
        let mut x: Vec<f64> = model.lower.clone();
        let mut status = vec![Status::Lower; structural + rows];
        for &v in at_upper {
            if model.upper[v].is_finite() {
                x[v] = model.upper[v];
                status[v] = Status::Upper;
            }
        }
        let mut residual = model.rhs.clone();
        for (v, col) in model.cols.iter().enumerate() {
            if x[v] != 0.0 {
                for &(r, a) in col {
                    residual[r] -= a * x[v];
                }
            }
        }

        let mut cols = model.cols;
        let mut lower = model.lower;
        let mut upper = model.upper;
        let mut cost = model.cost;
        let mut basis = vec![0usize; rows];
        let mut binv = vec![0.0; rows * rows];
        for r in 0..rows {
            let art = structural + r;
            let mut sign = if residual[r] >= 0.0 { 1.0 } else { -1.0 };
            let slack_fits = model.row_slack[r].and_then(|s| {
                let coef = cols[s].iter().find(|&&(row, _)| row == r).map(|&(_, a)| a)?;
                let value = x[s] + residual[r] / coef;
                (value >= lower[s] - FEAS_TOL && value <= upper[s] + FEAS_TOL).then_some((s, coef, value))
            });
            cols.push(vec![(r, sign)]);
            cost.push(0.0);
            lower.push(0.0);
            if let Some((s, coef, value)) = slack_fits {
                x[s] = value.clamp(lower[s], upper[s]);
                status[s] = Status::Basic(r);
                basis[r] = s;
                sign = coef;
                upper.push(0.0);
                x.push(0.0);
            } else {
                status[art] = Status::Basic(r);
                basis[r] = art;
                upper.push(f64::INFINITY);
                x.push(residual[r].abs());
            }
            binv[r * rows + r] = 1.0 / sign;
        }
        let refactor_period = rows.max(100);
        let work = cost.clone();
        let mut row_index = vec![Vec::new(); rows];
        for (j, col) in cols.iter().enumerate() {
            for &(r, a) in col {
                row_index[r].push((j, a));
            }
        }
        Self {
            rows,
            structural,
            cols,
            row_index,
            cost,
            lower,
            upper,
            rhs: model.rhs,
            basis,
            status,
            x,
            binv,
            work,
            d: vec![0.0; structural + rows],
            work_slack: 0.0,
            since_refactor: 0,
            refactor_period,
            iterations: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.structural]
    }

    pub fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    /// Dual simplex from the all-logical basis with every column on its
    /// cost-favorable bound, then a primal cleanup. `Ok(false)` when the
    /// program is infeasible.
    pub fn solve(&mut self) -> Result<bool> {
        self.fix_artificials();
        for j in 0..self.cols.len() {
            if matches!(self.status[j], Status::Basic(_)) || self.is_fixed(j) {
                continue;
            }
            if self.cost[j] > 0.0 {
                self.status[j] = Status::Lower;
            } else if self.cost[j] < 0.0 && self.upper[j].is_finite() {
                self.status[j] = Status::Upper;
            }
        }
        self.place_nonbasics();
        self.refactor()?;
        match self.reoptimize(None)? {
            DualOutcome::Optimal => Ok(true),
            DualOutcome::Infeasible => Ok(false),
            _ => Err(Error::Numerical("dual simplex stalled".into())),
        }
    }

    fn fix_artificials(&mut self) {
        for a in self.structural..self.cols.len() {
            self.upper[a] = 0.0;
            if !matches!(self.status[a], Status::Basic(_)) {
                self.x[a] = 0.0;
                self.status[a] = Status::Lower;
            }
        }
    }

    /// Duals `y = c_B B^-1` for the given cost vector.
    pub fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for (i, &b) in self.basis.iter().enumerate() {
            let c = cost[b];
            if c != 0.0 {
                let row = &self.binv[i * self.rows..(i + 1) * self.rows];
                for (yr, &v) in y.iter_mut().zip(row) {
                    *yr += c * v;
                }
            }
        }
        y
    }

    pub fn phase_two_duals(&self) -> Vec<f64> {
        self.duals(&self.cost)
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; self.rows];
        for &(r, a) in &self.cols[j] {
            for (i, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[i * self.rows + r] * a;
            }
        }
        alpha
    }

    /// Entries of row `p` of `B^-1 A` over nonbasic columns, gathered
    /// through the row-wise copy of `A`. `acc` must be zero on entry and is
    /// left zeroed.
    fn pivot_row(&self, p: usize, acc: &mut [f64], out: &mut Vec<(usize, f64)>) {
        let nr = self.rows;
        out.clear();
        for (r, &rho) in self.binv[p * nr..(p + 1) * nr].iter().enumerate() {
            if rho == 0.0 {
                continue;
            }
            for &(j, a) in &self.row_index[r] {
                if acc[j] == 0.0 {
                    out.push((j, 0.0));
                }
                acc[j] += rho * a;
                if acc[j] == 0.0 {
                    // exact cancellation; keep the slot alive
                    acc[j] = f64::MIN_POSITIVE;
                }
            }
        }
        out.retain_mut(|e| {
            let a = core::mem::take(&mut acc[e.0]);
            e.1 = a;
            !matches!(self.status[e.0], Status::Basic(_)) && a.abs() > 1e-12
        });
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.upper[j] - self.lower[j] <= 1e-12
    }

    fn pivot(&mut self, p: usize, q: usize, alpha: &[f64]) {
        let nr = self.rows;
        let inv = 1.0 / alpha[p];
        let (before, rest) = self.binv.split_at_mut(p * nr);
        let (prow, after) = rest.split_at_mut(nr);
        prow.iter_mut().for_each(|v| *v *= inv);
        for (i, row) in before.chunks_exact_mut(nr).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        for (off, row) in after.chunks_exact_mut(nr).enumerate() {
            let f = alpha[p + 1 + off];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        let leaving = self.basis[p];
        self.basis[p] = q;
        self.status[q] = Status::Basic(p);
        // caller sets the leaving status
        self.status[leaving] = Status::Lower;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    /// Rebuilds `B^-1` from scratch and recomputes the basic values.
    pub fn refactor(&mut self) -> Result<()> {
        let nr = self.rows;
        let mut b = vec![0.0; nr * nr];
        for (i, &v) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[v] {
                b[r * nr + i] = a;
            }
        }
        let mut inv = vec![0.0; nr * nr];
        for i in 0..nr {
            inv[i * nr + i] = 1.0;
        }
        for c in 0..nr {
            let (piv, mag) =
                (c..nr).map(|r| (r, b[r * nr + c].abs())).fold((c, -1.0), |a, x| if x.1 > a.1 { x } else { a });
            if mag < 1e-12 {
                return Err(Error::Numerical("singular basis".into()));
            }
            if piv != c {
                for k in 0..nr {
                    b.swap(piv * nr + k, c * nr + k);
                    inv.swap(piv * nr + k, c * nr + k);
                }
            }
            let d = 1.0 / b[c * nr + c];
            for k in 0..nr {
                b[c * nr + k] *= d;
                inv[c * nr + k] *= d;
            }
            for r in 0..nr {
                if r == c {
                    continue;
                }
                let f = b[r * nr + c];
                if f != 0.0 {
                    for k in 0..nr {
                        b[r * nr + k] -= f * b[c * nr + k];
                        inv[r * nr + k] -= f * inv[c * nr + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    /// `x_B = B^-1 (b - N x_N)`.
    fn recompute_basics(&mut self) {
        let mut residual = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if matches!(self.status[j], Status::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            for &(r, a) in col {
                residual[r] -= a * self.x[j];
            }
        }
        for i in 0..self.rows {
            let row = &self.binv[i * self.rows..(i + 1) * self.rows];
            self.x[self.basis[i]] = row.iter().zip(&residual).map(|(a, b)| a * b).sum();
        }
    }

    /// Primal simplex from a primal feasible basis. Devex pricing, switching
    /// to Bland's rule after `5 (rows + cols)` consecutive degenerate pivots.
    fn primal(&mut self, cost: &[f64]) -> Result<()> {
        let ncols = self.cols.len();
        let nr = self.rows;
        let bland_after = 5 * (nr + ncols);
        let max_iter = 50 * (nr + ncols) as u64 + 10_000;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut local = 0u64;
        let mut weights = vec![1.0; ncols];
        let mut y = self.duals(cost);
        let mut prow = vec![0.0; nr];
        loop {
            if self.since_refactor >= self.refactor_period {
                self.refactor()?;
                y = self.duals(cost);
            }
            let mut entering: Option<(usize, f64, f64, f64)> = None;
            for j in 0..ncols {
                let dir = match self.status[j] {
                    Status::Basic(_) => continue,
                    Status::Lower => 1.0,
                    Status::Upper => -1.0,
                };
                if self.is_fixed(j) {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                let gain = -dir * d;
                if gain <= OPT_TOL {
                    continue;
                }
                if bland {
                    entering = Some((j, dir, d, 0.0));
                    break;
                }
                let score = gain * gain / weights[j];
                if entering.is_none_or(|(_, _, _, s)| score > s) {
                    entering = Some((j, dir, d, score));
                }
            }
            let Some((q, dir, dq, _)) = entering else {
                return Ok(());
            };
            let alpha = self.ftran(q);

            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64)> = None;
            for (i, &al) in alpha.iter().enumerate() {
                let a = dir * al;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let limit = if a > 0.0 {
                    (self.x[b] - self.lower[b]) / a
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    (self.upper[b] - self.x[b]) / -a
                }
                .max(0.0);
                let better = match leave {
                    _ if limit < theta - RATIO_TIE => true,
                    Some((p, pa)) if limit <= theta + RATIO_TIE => {
                        if bland {
                            b < self.basis[p]
                        } else {
                            a.abs() > pa.abs()
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, a));
                }
            }
            if !theta.is_finite() {
                return Err(Error::Unbounded);
            }

            for (i, &al) in alpha.iter().enumerate() {
                if al != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * theta * al;
                }
            }
            self.x[q] += dir * theta;
            match leave {
                None => {
                    self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    self.iterations += 1;
                }
                Some((p, a)) => {
                    let b = self.basis[p];
                    let apq = alpha[p];
                    prow.copy_from_slice(&self.binv[p * nr..(p + 1) * nr]);
                    if !bland {
                        let wq = weights[q];
                        for j in 0..ncols {
                            if matches!(self.status[j], Status::Basic(_)) || j == q {
                                continue;
                            }
                            let apj: f64 = self.cols[j].iter().map(|&(r, v)| prow[r] * v).sum();
                            if apj != 0.0 {
                                let ratio = apj / apq;
                                weights[j] = weights[j].max(ratio * ratio * wq);
                            }
                        }
                        weights[b] = (wq / (apq * apq)).max(1.0);
                    }
                    let step = dq / apq;
                    y.iter_mut().zip(&prow).for_each(|(yi, r)| *yi += step * r);
                    self.pivot(p, q, &alpha);
                    if a > 0.0 {
                        self.status[b] = Status::Lower;
                        self.x[b] = self.lower[b];
                    } else {
                        self.status[b] = Status::Upper;
                        self.x[b] = self.upper[b];
                    }
                }
            }
            if theta <= RATIO_TIE {
                degenerate += 1;
                if degenerate > bland_after {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            local += 1;
            if local > max_iter {
                return Err(Error::Numerical("primal simplex iteration limit".into()));
            }
        }
    }

    /// Reduced costs of the phase-two objective under the current basis.
    fn compute_reduced_costs(&mut self) {
        let y = self.duals(&self.work);
        for j in 0..self.cols.len() {
            self.d[j] = match self.status[j] {
                Status::Basic(_) => 0.0,
                _ => self.reduced_cost(&self.work, &y, j),
            };
        }
    }

    /// Moves nonbasic boxed columns whose reduced cost has the wrong sign to
    /// the opposite bound. Returns whether anything moved.
    fn restore_dual_feasibility(&mut self) -> bool {
        let mut moved = false;
        for j in 0..self.cols.len() {
            if self.is_fixed(j) || !self.upper[j].is_finite() {
                continue;
            }
            match self.status[j] {
                Status::Lower if self.d[j] < -OPT_TOL => {
                    self.status[j] = Status::Upper;
                    self.x[j] = self.upper[j];
                    moved = true;
                }
                Status::Upper if self.d[j] > OPT_TOL => {
                    self.status[j] = Status::Lower;
                    self.x[j] = self.lower[j];
                    moved = true;
                }
                _ => {}
            }
        }
        moved
    }

    /// Dual simplex on the working costs with a bound-flipping ratio test. Stops early once the
    /// objective reaches `cutoff`.
    fn dual(&mut self, cutoff: Option<f64>) -> Result<DualOutcome> {
        let nr = self.rows;
        let ncols = self.cols.len();
        let max_iter = 20 * (nr + ncols) as u64 + 1_000;
        let mut local = 0u64;
        let mut row_alpha: Vec<(usize, f64)> = Vec::new();
        let mut row = vec![0.0; ncols];
        let mut breakpoints: Vec<(usize, f64, f64)> = Vec::new();
        let mut shift = vec![0.0; nr];
        let mut edge = vec![1.0; nr];
        let mut nz: Vec<(usize, f64)> = Vec::new();
        let mut fresh = true;
        loop {
            if fresh || self.since_refactor >= self.refactor_period {
                if !fresh {
                    self.refactor()?;
                }
                for (i, e) in edge.iter_mut().enumerate() {
                    *e = self.binv[i * nr..(i + 1) * nr].iter().map(|v| v * v).sum::<f64>().max(1e-12);
                }
                self.compute_reduced_costs();
                if self.restore_dual_feasibility() {
                    self.recompute_basics();
                }
                fresh = false;
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..nr {
                let b = self.basis[i];
                let viol = if self.x[b] < self.lower[b] - FEAS_TOL {
                    self.lower[b] - self.x[b]
                } else if self.x[b] > self.upper[b] + FEAS_TOL {
                    self.x[b] - self.upper[b]
                } else {
                    continue;
                };
                let score = viol * viol / edge[i];
                if leave.is_none_or(|(_, v)| score > v) {
                    leave = Some((i, score));
                }
            }
            let Some((p, _)) = leave else {
                return Ok(DualOutcome::Optimal);
            };
            let b = self.basis[p];
            let viol = if self.x[b] < self.lower[b] { self.lower[b] - self.x[b] } else { self.x[b] - self.upper[b] };
            if let Some(c) = cutoff {
                if self.work_objective() - self.work_slack >= c {
                    return Ok(DualOutcome::Cutoff);
                }
            }
            let going_up = self.x[b] < self.lower[b];
            let sigma = if going_up { 1.0 } else { -1.0 };
            let target = if going_up { self.lower[b] } else { self.upper[b] };

            self.pivot_row(p, &mut row, &mut row_alpha);
            breakpoints.clear();
            for &(j, a) in &row_alpha {
                let at_lower = self.status[j] == Status::Lower;
                if self.is_fixed(j) {
                    continue;
                }
                let sa = sigma * a;
                let ratio = match at_lower {
                    true if sa < -PIVOT_TOL => self.d[j].max(0.0) / -sa,
                    false if sa > PIVOT_TOL => (-self.d[j]).max(0.0) / sa,
                    _ => continue,
                };
                breakpoints.push((j, ratio, a.abs()));
            }
            // breakpoints are ordered lazily: only a short prefix is usually needed
            let mut sorted = 0;
            let mut slope = viol;
            let mut stop = None;
            let mut idx = 0;
            while idx < breakpoints.len() {
                if idx == sorted {
                    sorted = sort_prefix(&mut breakpoints, sorted);
                }
                let (j, _, a) = breakpoints[idx];
                let range = self.upper[j] - self.lower[j];
                let after = slope - a * range;
                if !range.is_finite() || after <= 0.0 {
                    stop = Some(idx);
                    break;
                }
                slope = after;
                idx += 1;
            }
            let Some(first) = stop else {
                return Ok(DualOutcome::Infeasible);
            };
            let limit = breakpoints[first].1 + RATIO_TIE;
            let mut chosen = first;
            let mut idx = first + 1;
            while idx < breakpoints.len() {
                if idx == sorted {
                    sorted = sort_prefix(&mut breakpoints, sorted);
                }
                let bp = breakpoints[idx];
                if bp.1 > limit {
                    break;
                }
                if bp.2 > breakpoints[chosen].2 {
                    chosen = idx;
                }
                idx += 1;
            }
            let q = breakpoints[chosen].0;
            let alpha_q = row_alpha.iter().find(|e| e.0 == q).map_or(0.0, |e| e.1);
            // exact dual step, so that d_q lands on zero
            let t = -self.d[q] / (sigma * alpha_q);

            // flips: breakpoints passed before the entering one
            shift.iter_mut().for_each(|v| *v = 0.0);
            let mut flipped = false;
            for &(j, _, _) in &breakpoints[..first] {
                let (from, to, st) = match self.status[j] {
                    Status::Lower => (self.lower[j], self.upper[j], Status::Upper),
                    _ => (self.upper[j], self.lower[j], Status::Lower),
                };
                let delta = to - from;
                for &(r, a) in &self.cols[j] {
                    shift[r] += a * delta;
                }
                self.x[j] = to;
                self.status[j] = st;
                flipped = true;
            }
            if flipped {
                nz.clear();
                nz.extend((0..nr).filter(|&r| shift[r] != 0.0).map(|r| (r, shift[r])));
                for i in 0..nr {
                    let row = &self.binv[i * nr..(i + 1) * nr];
                    let dx: f64 = nz.iter().map(|&(r, v)| row[r] * v).sum();
                    self.x[self.basis[i]] -= dx;
                }
            }

            for &(j, a) in &row_alpha {
                self.d[j] += t * sigma * a;
            }
            let alpha = self.ftran(q);
            let step = (self.x[b] - target) / alpha[p];
            for (i, &al) in alpha.iter().enumerate() {
                if al != 0.0 {
                    let v = self.basis[i];
                    self.x[v] -= al * step;
                }
            }
            self.x[q] += step;

            // steepest-edge weights: tau = B^-1 rho_p
            let prow = &self.binv[p * nr..(p + 1) * nr];
            nz.clear();
            nz.extend(prow.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(r, &v)| (r, v)));
            let apq = alpha[p];
            let bp = edge[p];
            for i in 0..nr {
                if i == p || alpha[i] == 0.0 {
                    continue;
                }
                let row = &self.binv[i * nr..(i + 1) * nr];
                let tau: f64 = nz.iter().map(|&(r, v)| row[r] * v).sum();
                let r = alpha[i] / apq;
                edge[i] = (edge[i] - 2.0 * r * tau + r * r * bp).max(1e-12);
            }
            edge[p] = (bp / (apq * apq)).max(1e-12);

            self.pivot(p, q, &alpha);
            self.status[b] = if going_up { Status::Lower } else { Status::Upper };
            self.x[b] = target;
            self.d[q] = 0.0;
            self.d[b] = sigma * t;
            local += 1;
            if local > max_iter {
                return Ok(DualOutcome::Stalled);
            }
        }
    }

    /// Shifts every movable cost by a small distinct amount toward its
    /// current bound, which breaks the ties that stall the dual on problems
    /// with many zero costs.
    fn perturb_costs(&mut self) {
        self.work.clone_from(&self.cost);
        self.work_slack = 0.0;
        for j in 0..self.cols.len() {
            if self.is_fixed(j) {
                continue;
            }
            let h = (crate::rng::mix64(j as u64) >> 11) as f64 / (1u64 << 53) as f64;
            let delta = COST_PERTURBATION * (1.0 + self.cost[j].abs()) * (1.0 + h);
            self.work[j] += if self.status[j] == Status::Upper { -delta } else { delta };
            let range = self.upper[j] - self.lower[j];
            self.work_slack += delta * if range.is_finite() { range } else { f64::INFINITY };
        }
    }

    fn work_objective(&self) -> f64 {
        self.work.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    /// Dual simplex on perturbed costs, then a primal pass on the true ones.
    pub fn reoptimize(&mut self, cutoff: Option<f64>) -> Result<DualOutcome> {
        self.perturb_costs();
        let outcome = self.dual(cutoff);
        self.work.clone_from(&self.cost);
        self.work_slack = 0.0;
        let outcome = outcome?;
        if outcome == DualOutcome::Optimal {
            let cost = self.cost.clone();
            self.primal(&cost)?;
        }
        Ok(outcome)
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot { basis: self.basis.clone(), status: self.status.clone() }
    }

    /// Restores a basis and recomputes values under the current bounds.
    pub fn restore(&mut self, snap: &BasisSnapshot) -> Result<()> {
        self.basis.clone_from(&snap.basis);
        self.status.clone_from(&snap.status);
        self.place_nonbasics();
        self.refactor()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes bounds of a column; call [`Simplex::sync`] after a batch.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    /// Moves nonbasic columns onto their (possibly changed) bounds and
    /// recomputes the basic values.
    pub fn sync(&mut self) {
        self.place_nonbasics();
        self.recompute_basics();
    }

    fn place_nonbasics(&mut self) {
        for j in 0..self.cols.len() {
            match self.status[j] {
                Status::Basic(_) => {}
                Status::Lower => self.x[j] = self.lower[j],
                Status::Upper => {
                    if self.upper[j].is_finite() {
                        self.x[j] = self.upper[j];
                    } else {
                        self.status[j] = Status::Lower;
                        self.x[j] = self.lower[j];
                    }
                }
            }
        }
    }
}

/// Extends the sorted prefix of `bps` (by ratio, then index) past `done`,
/// leaving every later entry no smaller. Returns the new prefix length.
fn sort_prefix(bps: &mut [(usize, f64, f64)], done: usize) -> usize {
    let order = |x: &(usize, f64, f64), y: &(usize, f64, f64)| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0));
    let end = (2 * done).max(done + 16).min(bps.len());
    if end < bps.len() {
        bps[done..].select_nth_unstable_by(end - done - 1, order);
    }
    bps[done..end].sort_unstable_by(order);
    end
}
