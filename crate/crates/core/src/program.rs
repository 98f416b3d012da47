//! Standard-form linear / mixed-integer programs for the allocation problems.
//!
//! Variable layout: `w_ij` at index `i * n + j`, followed by the auxiliaries
//! of the objective (scalar `t` for MaxMin; `tau` then one slack per group for
//! CVaR). Every variable is boxed.
//!
//! ```text
//! Mean    max  (1/m) sum_ij a_ij w_ij
//! MaxMin  max  t                     t <= sum_j a_ij w_ij          (per consumer)
//! CVaR    min  tau + c sum_g s_g     s_g + tau >= L_g(w)            (per group)
//!         s.t. sum_j w_ij  = k                                     (per consumer)
//!              sum_i w_ij >= floor                                 (per producer, gamma > 0)
//!              sum_ij v_j w_ij >= theta * Vmax                     (theta > 0)
//! ```
//! with `a_ij = rho_ij / D_i` and `c = 1 / ((1 - alpha) G)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::error::{invalid, Result};
use crate::metrics::{self, utility_denominator};
use crate::types::{Allocation, Objective, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrality {
    Binary,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Ge,
    Le,
}

/// Constraint family a row belongs to; used to name infeasibilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Family {
    Cardinality,
    ProducerFloor,
    Gmv,
    CvarLink,
    MaxMinLink,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Cardinality => "cardinality",
            Family::ProducerFloor => "producer floor",
            Family::Gmv => "GMV",
            Family::CvarLink => "CVaR link",
            Family::MaxMinLink => "max-min link",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
    pub family: Family,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v]).sum()
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        let act = self.activity(x);
        let tol = tol * self.rhs.abs().max(1.0);
        match self.kind {
            RowKind::Eq => (act - self.rhs).abs() <= tol,
            RowKind::Ge => act >= self.rhs - tol,
            RowKind::Le => act <= self.rhs + tol,
        }
    }
}

/// Positions of the auxiliary variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub m: usize,
    pub n: usize,
    /// Max-min level `t`.
    pub t: Option<usize>,
    /// CVaR threshold `tau`; the group slacks follow it.
    pub tau: Option<usize>,
    pub groups: usize,
}

impl VarLayout {
    pub fn weight(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn weight_count(&self) -> usize {
        self.m * self.n
    }

    pub fn group_slack(&self, g: usize) -> Option<usize> {
        self.tau.map(|t| t + 1 + g)
    }
}

#[derive(Debug, Clone)]
pub struct StandardProgram {
    pub layout: VarLayout,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<f64>,
    /// Constant added to `objective . x`.
    pub offset: f64,
    pub sense: Sense,
    pub rows: Vec<Row>,
    pub integer: Vec<bool>,
    pub producer_floor: Option<usize>,
    pub gmv_floor: Option<f64>,
    /// Normalized relevance `a_ij` used by the utility rows.
    pub utility_coef: Vec<f64>,
    pub problem: Problem,
}

impl StandardProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn equality_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.kind == RowKind::Eq).count()
    }

    pub fn inequality_rows(&self) -> usize {
        self.rows.len() - self.equality_rows()
    }

    pub fn rows_of(&self, family: Family) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.family == family)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Copy with the integrality mask switched.
    pub fn with_integrality(&self, integrality: Integrality) -> Self {
        let mut p = self.clone();
        let binary = integrality == Integrality::Binary;
        for v in 0..p.layout.weight_count() {
            p.integer[v] = binary;
        }
        p
    }

    /// `true` when `better` improves on `than` in the program's sense.
    pub fn improves(&self, better: f64, than: f64) -> bool {
        match self.sense {
            Sense::Maximize => better > than,
            Sense::Minimize => better < than,
        }
    }

    /// Full variable vector for a weight matrix, with the auxiliaries set to
    /// their optimal values given `w`.
    pub fn complete(&self, w: &[f64]) -> Vec<f64> {
        let lay = &self.layout;
        let mut x = vec![0.0; self.num_vars()];
        x[..lay.weight_count()].copy_from_slice(w);
        if let Some(t) = lay.t {
            let level = self.linked_utilities(w).into_iter().fold(f64::INFINITY, f64::min);
            x[t] = level.clamp(self.lower[t], self.upper[t]);
        }
        if let Some(tau) = lay.tau {
            let losses = self.linked_losses(w);
            let (_, best_tau) = metrics::cvar_min(&losses, self.problem.params.alpha).unwrap_or((0.0, 0.0));
            x[tau] = best_tau.clamp(self.lower[tau], self.upper[tau]);
            for (g, l) in losses.iter().enumerate() {
                let s = lay.group_slack(g).expect("cvar layout");
                x[s] = (l - best_tau).max(0.0).min(self.upper[s]);
            }
        }
        x
    }

    /// Per-consumer utility as seen by the program's utility rows.
    fn linked_utilities(&self, w: &[f64]) -> Vec<f64> {
        let n = self.layout.n;
        let constant = self.constant_rows();
        (0..self.layout.m)
            .map(|i| if constant[i] { 1.0 } else { (0..n).map(|j| self.utility_coef[i * n + j] * w[i * n + j]).sum() })
            .collect()
    }

    fn linked_losses(&self, w: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = self.linked_utilities(w).into_iter().map(|u| 1.0 - u).collect();
        metrics::group_means(&u, &self.problem.groups)
    }

    fn constant_rows(&self) -> Vec<bool> {
        let n = self.layout.n;
        (0..self.layout.m).map(|i| self.utility_coef[i * n..(i + 1) * n].iter().all(|&a| a == 0.0)).collect()
    }

    /// First family with a row violated by `x`, if any. Bounds are checked too
    /// and reported as cardinality violations.
    pub fn first_violation(&self, x: &[f64], tol: f64) -> Option<Family> {
        if x.iter().zip(&self.lower).zip(&self.upper).any(|((v, l), u)| *v < l - tol || *v > u + tol) {
            return Some(Family::Cardinality);
        }
        self.rows.iter().find(|r| !r.is_satisfied(x, tol)).map(|r| r.family)
    }

    /// Allocation read from the weight block of `x`.
    pub fn allocation(&self, x: &[f64]) -> Allocation {
        Allocation::from_solver(self.layout.m, self.layout.n, &x[..self.layout.weight_count()])
    }

    /// Writes the program in CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, out: &mut W) -> fmt::Result {
        let name = |v: usize| -> String {
            let lay = &self.layout;
            let mut s = String::new();
            if v < lay.weight_count() {
                let _ = write!(s, "w_{}_{}", v / lay.n, v % lay.n);
            } else if Some(v) == lay.t {
                s.push('t');
            } else if Some(v) == lay.tau {
                s.push_str("tau");
            } else {
                let _ = write!(s, "s_{}", v - lay.tau.map_or(0, |t| t + 1));
            }
            s
        };
        let terms = |out: &mut W, coeffs: &mut dyn Iterator<Item = (usize, f64)>| -> fmt::Result {
            let mut first = true;
            for (v, a) in coeffs {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 {
                    "-"
                } else if first {
                    ""
                } else {
                    "+"
                };
                write!(out, " {sign} {} {}", a.abs(), name(v))?;
                first = false;
            }
            if first {
                write!(out, " 0 {}", name(0))?;
            }
            Ok(())
        };
        writeln!(out, "\\ offset {}", self.offset)?;
        writeln!(out, "{}", if self.sense == Sense::Maximize { "Maximize" } else { "Minimize" })?;
        write!(out, " obj:")?;
        terms(out, &mut self.objective.iter().copied().enumerate())?;
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for (r, row) in self.rows.iter().enumerate() {
            write!(out, " r{r}:")?;
            terms(out, &mut row.coeffs.iter().copied())?;
            let op = match row.kind {
                RowKind::Eq => "=",
                RowKind::Ge => ">=",
                RowKind::Le => "<=",
            };
            writeln!(out, " {op} {}", row.rhs)?;
        }
        writeln!(out, "Bounds")?;
        for v in 0..self.num_vars() {
            writeln!(out, " {} <= {} <= {}", self.lower[v], name(v), self.upper[v])?;
        }
        if self.integer.iter().any(|&b| b) {
            writeln!(out, "Binaries")?;
            for v in (0..self.num_vars()).filter(|&v| self.integer[v]) {
                writeln!(out, " {}", name(v))?;
            }
        }
        writeln!(out, "End")
    }
}

/// Builds the program for `problem`.
pub fn build(problem: &Problem, integrality: Integrality) -> Result<StandardProgram> {
    let params = &problem.params;
    params.validate(problem.n())?;
    let (m, n, k) = (problem.m(), problem.n(), params.k);
    let groups = &problem.groups;
    if params.objective == Objective::Cvar && groups.group_count() == 0 {
        return Err(invalid("CVaR objective needs a group partition"));
    }
    let norm = params.effective_normalization();

    let mut utility_coef = vec![0.0; m * n];
    for (i, row) in problem.rho.rows().enumerate() {
        let d = utility_denominator(row, k, norm);
        if d > 0.0 {
            for (j, &r) in row.iter().enumerate() {
                utility_coef[i * n + j] = r / d;
            }
        }
    }
    let constant: Vec<bool> = (0..m).map(|i| utility_coef[i * n..(i + 1) * n].iter().all(|&a| a == 0.0)).collect();

    let mut layout = VarLayout { m, n, t: None, tau: None, groups: 0 };
    let mut lower = vec![0.0; m * n];
    let mut upper = vec![1.0; m * n];
    let mut objective = vec![0.0; m * n];
    let mut offset = 0.0;
    let mut rows = Vec::new();

    let sense = match params.objective {
        Objective::Mean => {
            for v in 0..m * n {
                objective[v] = utility_coef[v] / m as f64;
            }
            offset = constant.iter().filter(|&&c| c).count() as f64 / m as f64;
            Sense::Maximize
        }
        Objective::MaxMin => {
            let t = m * n;
            layout.t = Some(t);
            lower.push(0.0);
            // utility of a row under either normalization never exceeds k
            upper.push(k as f64);
            objective.push(1.0);
            for i in 0..m {
                // t - sum_j a_ij w_ij <= 0, or t <= 1 for an all-zero row
                let mut coeffs = vec![(t, 1.0)];
                if !constant[i] {
                    coeffs.extend((0..n).map(|j| (i * n + j, -utility_coef[i * n + j])));
                }
                rows.push(Row {
                    coeffs,
                    kind: RowKind::Le,
                    rhs: if constant[i] { 1.0 } else { 0.0 },
                    family: Family::MaxMinLink,
                });
            }
            Sense::Maximize
        }
        Objective::Cvar => {
            let g_count = groups.group_count();
            let tau = m * n;
            layout.tau = Some(tau);
            layout.groups = g_count;
            let scale = 1.0 / ((1.0 - params.alpha) * g_count as f64);
            // losses lie in [0, 1], so the optimal tau and slacks do too
            lower.push(0.0);
            upper.push(1.0);
            objective.push(1.0);
            for _ in 0..g_count {
                lower.push(0.0);
                upper.push(1.0);
                objective.push(scale);
            }
            for g in 0..g_count {
                // s_g + tau + sum_{i in g} a_ij w_ij / N_g >= (# non-constant members) / N_g
                let size = groups.sizes()[g] as f64;
                let mut coeffs = vec![(tau + 1 + g, 1.0), (tau, 1.0)];
                let mut rhs = 0.0;
                for i in (0..m).filter(|&i| groups.group_of(i) == g) {
                    if constant[i] {
                        continue;
                    }
                    rhs += 1.0 / size;
                    coeffs.extend((0..n).map(|j| (i * n + j, utility_coef[i * n + j] / size)));
                }
                rows.push(Row { coeffs, kind: RowKind::Ge, rhs, family: Family::CvarLink });
            }
            Sense::Minimize
        }
    };

    let mut body = Vec::with_capacity(m + n + 1);
    for i in 0..m {
        body.push(Row {
            coeffs: (0..n).map(|j| (i * n + j, 1.0)).collect(),
            kind: RowKind::Eq,
            rhs: k as f64,
            family: Family::Cardinality,
        });
    }
    let producer_floor = problem.producer_floor();
    if let Some(floor) = producer_floor {
        for j in 0..n {
            body.push(Row {
                coeffs: (0..m).map(|i| (i * n + j, 1.0)).collect(),
                kind: RowKind::Ge,
                rhs: floor as f64,
                family: Family::ProducerFloor,
            });
        }
    }
    let gmv_floor = problem.gmv_floor();
    if let Some(g) = gmv_floor {
        let values = problem.values.as_slice();
        body.push(Row {
            coeffs: (0..m * n).map(|v| (v, values[v % n])).collect(),
            kind: RowKind::Ge,
            rhs: g,
            family: Family::Gmv,
        });
    }
    body.extend(rows);

    let num_vars = objective.len();
    let binary = integrality == Integrality::Binary;
    let integer = (0..num_vars).map(|v| binary && v < m * n).collect();
    Ok(StandardProgram {
        layout,
        lower,
        upper,
        objective,
        offset,
        sense,
        rows: body,
        integer,
        producer_floor,
        gmv_floor,
        utility_coef,
        problem: problem.clone(),
    })
}

/// Per-row indices of the largest objective-weighted relevance; used to
/// start the simplex from the unconstrained top-k allocation.
pub(crate) fn crash_selection(program: &StandardProgram) -> Vec<usize> {
    let (m, n, k) = (program.layout.m, program.layout.n, program.problem.params.k);
    let mut at_upper = Vec::with_capacity(m * k);
    for i in 0..m {
        let row = program.problem.rho.row(i);
        for j in metrics::top_k_indices(row, k) {
            at_upper.push(i * n + j);
        }
    }
    at_upper
}
