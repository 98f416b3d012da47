//! Gradient solvers over a temperature-annealed sigmoid parameterization.
//!
//! Weights are `w_ij = sigmoid(z_ij / eta_t)` with
//! `eta_t = max(eta0 * rate^t, eta_min)`. The utility term is the group CVaR
//! loss with `tau` optimized jointly (clamped at 0); constraints enter as
//!
//! ```text
//! L_card = sum_i (c_i - k)^2              c_i = sum_j w_ij
//! L_prod = sum_j max(0, p_min - p_j)^2    p_j = sum_i w_ij
//! L_bin  = sum_ij (w_ij (1 - w_ij))^2
//! ```
//!
//! AugLag minimizes `L_util + a.(c - k) + b.max(0, p_min - p) + lambda/2 (L_card + L_prod)`
//! with dual ascent on `a, b` every `dual_period` steps. SCGrad minimizes the
//! weighted sum `L_util + L_card + L_prod + L_bin` without duals.
//!
//! The GMV row is not modeled by either solver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::lp::FractionalSolution;
use crate::metrics::{cvar_min, top_k_indices, utility_denominator};
use crate::rng::PortableRng;
use crate::types::{Allocation, Objective, Problem};

fn sq(x: f64) -> f64 {
    x * x
}

/// Starting point of the logits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GradInit {
    /// `z_ij = eta0 * scale * (rho_ij - t_i) / max_j rho_ij`, where `t_i` sits
    /// halfway between the k-th and (k+1)-th relevance of the row.
    Relevance { scale: f64 },
    /// Independent `Normal(0, sigma^2)` logits drawn from the seed.
    Random { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StepRule {
    Fixed,
    Adam { beta1: f64, beta2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GradConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub eta0: f64,
    pub anneal_rate: f64,
    pub eta_min: f64,
    /// AugLag penalty weight.
    pub lambda: f64,
    /// AugLag primal steps between dual updates.
    pub dual_period: usize,
    pub dual_step: f64,
    /// Stop once the temperature is at its floor and the total loss moves
    /// by less than this (relative). 0 disables early stopping.
    pub tolerance: f64,
    pub seed: u64,
    pub init: GradInit,
    pub step_rule: StepRule,
    /// SCGrad term weights.
    pub card_weight: f64,
    pub prod_weight: f64,
    pub bin_weight: f64,
}

impl Default for GradConfig {
    fn default() -> Self {
        let lambda = 10.0;
        Self {
            learning_rate: 0.05,
            iterations: 5000,
            eta0: 1.0,
            anneal_rate: 0.999,
            eta_min: 0.05,
            lambda,
            dual_period: 50,
            dual_step: 0.1 * lambda,
            tolerance: 0.0,
            seed: 0,
            init: GradInit::Relevance { scale: 10.0 },
            step_rule: StepRule::Fixed,
            card_weight: 1.0,
            prod_weight: 1.0,
            bin_weight: 1.0,
        }
    }
}

impl GradConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning_rate={} must be positive", self.learning_rate)));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if !(self.eta_min > 0.0) || !(self.eta0 > 0.0) {
            return Err(invalid(format!("eta0={} and eta_min={} must be positive", self.eta0, self.eta_min)));
        }
        if !(self.anneal_rate > 0.0 && self.anneal_rate < 1.0) {
            return Err(invalid(format!("anneal_rate={} must lie in (0, 1)", self.anneal_rate)));
        }
        if !(self.lambda > 0.0) {
            return Err(invalid(format!("lambda={} must be positive", self.lambda)));
        }
        if self.dual_period == 0 || !(self.dual_step >= 0.0) {
            return Err(invalid("dual_period must be positive and dual_step nonnegative"));
        }
        if [self.card_weight, self.prod_weight, self.bin_weight].iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("penalty weights must be nonnegative"));
        }
        Ok(())
    }
}

/// `max(eta0 * anneal_rate^t, eta_min)`.
pub fn temperature(t: usize, config: &GradConfig) -> f64 {
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    (config.eta0 * libm::pow(config.anneal_rate, exp as f64)).max(config.eta_min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradStep {
    pub iteration: usize,
    pub total: f64,
    pub cvar: f64,
    pub card: f64,
    pub prod: f64,
    /// Zero for AugLag.
    pub bin: f64,
    pub temperature: f64,
    /// Euclidean norm of the AugLag duals; zero for SCGrad.
    pub dual_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradTrace {
    pub steps: Vec<GradStep>,
}

/// Loss became NaN or infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Diverged {
    pub iteration: usize,
    pub trace: GradTrace,
}

impl From<Diverged> for Error {
    fn from(d: Diverged) -> Self {
        Error::Numerical(format!("gradient loss diverged at iteration {}", d.iteration))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Util,
    Card,
    Prod,
    Bin,
}

/// Precomputed coefficients of the four loss terms for one problem.
#[derive(Debug, Clone)]
pub struct GradModel {
    m: usize,
    n: usize,
    k: f64,
    /// `rho_ij / D_i`, zero on constant rows.
    coef: Vec<f64>,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    alpha: f64,
    pub p_min: f64,
}

impl GradModel {
    /// Mean is treated as CVaR with `alpha = 0`; MaxMin is rejected.
    pub fn new(problem: &Problem) -> Result<Self> {
        let params = &problem.params;
        let alpha = match params.objective {
            Objective::Cvar => params.alpha,
            Objective::Mean => 0.0,
            Objective::MaxMin => return Err(invalid("gradient solvers support the mean and CVaR objectives only")),
        };
        let (m, n) = (problem.m(), problem.n());
        let norm = params.effective_normalization();
        let mut coef = vec![0.0; m * n];
        for (i, row) in problem.rho.rows().enumerate() {
            let d = utility_denominator(row, params.k, norm);
            if d > 0.0 {
                for (c, &r) in coef[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *c = r / d;
                }
            }
        }
        Ok(Self {
            m,
            n,
            k: params.k as f64,
            coef,
            labels: problem.groups.labels().to_vec(),
            sizes: problem.groups.sizes().to_vec(),
            alpha,
            p_min: problem.producer_floor().unwrap_or(0) as f64,
        })
    }

    pub fn weights(&self, z: &[f64], eta: f64) -> Vec<f64> {
        z.iter().map(|&x| sigmoid(x / eta)).collect()
    }

    pub fn group_losses(&self, w: &[f64]) -> Vec<f64> {
        let mut loss = vec![0.0; self.sizes.len()];
        for i in 0..self.m {
            let row = i * self.n..(i + 1) * self.n;
            if self.coef[row.clone()].iter().all(|&a| a == 0.0) {
                continue;
            }
            let u: f64 = self.coef[row.clone()].iter().zip(&w[row]).map(|(a, x)| a * x).sum();
            loss[self.labels[i]] += 1.0 - u;
        }
        for (l, &s) in loss.iter_mut().zip(&self.sizes) {
            *l /= s as f64;
        }
        loss
    }

    fn cvar_scale(&self) -> f64 {
        1.0 / ((1.0 - self.alpha) * self.sizes.len() as f64)
    }

    fn row_sums(&self, w: &[f64]) -> Vec<f64> {
        w.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    fn exposures(&self, w: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        for row in w.chunks(self.n) {
            for (e, x) in p.iter_mut().zip(row) {
                *e += x;
            }
        }
        p
    }

    pub fn loss(&self, term: LossTerm, w: &[f64], tau: f64) -> f64 {
        match term {
            LossTerm::Util => {
                let s = self.cvar_scale();
                tau + s * self.group_losses(w).iter().map(|l| (l - tau).max(0.0)).sum::<f64>()
            }
            LossTerm::Card => self.row_sums(w).iter().map(|c| (c - self.k) * (c - self.k)).sum(),
            LossTerm::Prod => self.exposures(w).iter().map(|p| sq((self.p_min - p).max(0.0))).sum(),
            LossTerm::Bin => w.iter().map(|x| sq(x * (1.0 - x))).sum(),
        }
    }

    /// Adds `scale * dL/dw` into `out`.
    pub fn add_grad_w(&self, term: LossTerm, w: &[f64], tau: f64, scale: f64, out: &mut [f64]) {
        let n = self.n;
        match term {
            LossTerm::Util => {
                let s = self.cvar_scale();
                let active: Vec<f64> = self
                    .group_losses(w)
                    .iter()
                    .zip(&self.sizes)
                    .map(|(&l, &size)| if l > tau { s / size as f64 } else { 0.0 })
                    .collect();
                for i in 0..self.m {
                    let g = active[self.labels[i]];
                    if g == 0.0 {
                        continue;
                    }
                    for (o, a) in out[i * n..(i + 1) * n].iter_mut().zip(&self.coef[i * n..(i + 1) * n]) {
                        *o -= scale * g * a;
                    }
                }
            }
            LossTerm::Card => {
                for (i, c) in self.row_sums(w).into_iter().enumerate() {
                    let d = scale * 2.0 * (c - self.k);
                    out[i * n..(i + 1) * n].iter_mut().for_each(|o| *o += d);
                }
            }
            LossTerm::Prod => {
                let d: Vec<f64> = self.exposures(w).iter().map(|p| -scale * 2.0 * (self.p_min - p).max(0.0)).collect();
                for row in out.chunks_mut(n) {
                    row.iter_mut().zip(&d).for_each(|(o, d)| *o += d);
                }
            }
            LossTerm::Bin => {
                for (o, &x) in out.iter_mut().zip(w) {
                    *o += scale * 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
                }
            }
        }
    }

    /// Gradient of one term with respect to the logits at temperature `eta`.
    pub fn grad_z(&self, term: LossTerm, z: &[f64], eta: f64, tau: f64) -> Vec<f64> {
        let w = self.weights(z, eta);
        let mut g = vec![0.0; w.len()];
        self.add_grad_w(term, &w, tau, 1.0, &mut g);
        chain(&mut g, &w, eta);
        g
    }

    /// Derivative of the utility term with respect to `tau`.
    pub fn tau_grad(&self, w: &[f64], tau: f64) -> f64 {
        let above = self.group_losses(w).iter().filter(|&&l| l > tau).count();
        1.0 - self.cvar_scale() * above as f64
    }

    fn init(&self, rho: &[f64], cfg: &GradConfig) -> Vec<f64> {
        let n = self.n;
        match cfg.init {
            GradInit::Relevance { scale } => {
                let k = self.k as usize;
                let mut z = vec![0.0; self.m * n];
                for (i, row) in rho.chunks(n).enumerate() {
                    let top = top_k_indices(row, (k + 1).min(n));
                    let kth = row[top[k - 1]];
                    let thr = if k < n { 0.5 * (kth + row[top[k]]) } else { kth - 0.5 };
                    let max = row[top[0]];
                    let spread = if max > 0.0 { max } else { 1.0 };
                    for (zj, &r) in z[i * n..(i + 1) * n].iter_mut().zip(row) {
                        *zj = cfg.eta0 * scale * (r - thr) / spread;
                    }
                }
                z
            }
            GradInit::Random { sigma } => {
                let mut rng = PortableRng::new(cfg.seed);
                (0..self.m * n).map(|_| rng.normal(0.0, sigma)).collect()
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Converts `dL/dw` into `dL/dz` in place.
fn chain(g: &mut [f64], w: &[f64], eta: f64) {
    for (gi, &x) in g.iter_mut().zip(w) {
        *gi *= x * (1.0 - x) / eta;
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Method {
    AugLag,
    SCGrad,
}

/// Adam moments, allocated only when the rule asks for them.
struct Stepper {
    rule: StepRule,
    lr: f64,
    m1: Vec<f64>,
    m2: Vec<f64>,
    t: i32,
}

impl Stepper {
    fn new(rule: StepRule, lr: f64, len: usize) -> Self {
        let len = if matches!(rule, StepRule::Adam { .. }) { len } else { 0 };
        Self { rule, lr, m1: vec![0.0; len], m2: vec![0.0; len], t: 0 }
    }

    /// Applies one step to `x` (the last slot is `tau`).
    fn apply(&mut self, x: &mut [f64], g: &[f64]) {
        match self.rule {
            StepRule::Fixed => x.iter_mut().zip(g).for_each(|(x, g)| *x -= self.lr * g),
            StepRule::Adam { beta1, beta2 } => {
                self.t = self.t.saturating_add(1);
                let c1 = 1.0 - libm::pow(beta1, self.t as f64);
                let c2 = 1.0 - libm::pow(beta2, self.t as f64);
                for (((x, &g), m1), m2) in x.iter_mut().zip(g).zip(&mut self.m1).zip(&mut self.m2) {
                    *m1 = beta1 * *m1 + (1.0 - beta1) * g;
                    *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
                    *x -= self.lr * (*m1 / c1) / (libm::sqrt(*m2 / c2) + 1e-8);
                }
            }
        }
    }
}

/// Final weights and trace, or the trace up to the step where the loss
/// stopped being finite. Input errors are reported by the outer `Result`.
pub type GradOutcome = core::result::Result<(FractionalSolution, GradTrace), Diverged>;

/// Augmented Lagrangian solver.
pub fn solve_auglag(problem: &Problem, config: &GradConfig) -> Result<GradOutcome> {
    run(problem, config, Method::AugLag)
}

/// Soft-penalty solver with the binarization regularizer.
pub fn solve_scgrad(problem: &Problem, config: &GradConfig) -> Result<GradOutcome> {
    run(problem, config, Method::SCGrad)
}

fn run(problem: &Problem, cfg: &GradConfig, method: Method) -> Result<GradOutcome> {
    cfg.validate()?;
    let model = GradModel::new(problem)?;
    let (m, n) = (model.m, model.n);
    let mut z = model.init(problem.rho.as_slice(), cfg);
    z.push(0.0);
    let w0 = model.weights(&z[..m * n], temperature(0, cfg));
    z[m * n] = cvar_min(&model.group_losses(&w0), model.alpha)?.1;

    let mut duals_a = vec![0.0; if method == Method::AugLag { m } else { 0 }];
    let mut duals_b = vec![0.0; if method == Method::AugLag { n } else { 0 }];
    let (card_w, prod_w, bin_w) = match method {
        Method::AugLag => (0.5 * cfg.lambda, 0.5 * cfg.lambda, 0.0),
        Method::SCGrad => (cfg.card_weight, cfg.prod_weight, cfg.bin_weight),
    };

    let mut stepper = Stepper::new(cfg.step_rule, cfg.learning_rate, m * n + 1);
    let mut trace = GradTrace::default();
    let mut grad = vec![0.0; m * n + 1];
    let mut prev_total = f64::NAN;
    let mut eta = temperature(0, cfg);
    let mut iterations = 0u64;
    for t in 0..cfg.iterations {
        eta = temperature(t, cfg);
        let tau = z[m * n];
        let w = model.weights(&z[..m * n], eta);
        let cvar = model.loss(LossTerm::Util, &w, tau);
        let card = model.loss(LossTerm::Card, &w, tau);
        let prod = model.loss(LossTerm::Prod, &w, tau);
        let bin = if bin_w > 0.0 { model.loss(LossTerm::Bin, &w, tau) } else { 0.0 };
        let rows = model.row_sums(&w);
        let exposure = model.exposures(&w);
        let mut total = cvar + card_w * card + prod_w * prod + bin_w * bin;
        if method == Method::AugLag {
            total += duals_a.iter().zip(&rows).map(|(a, c)| a * (c - model.k)).sum::<f64>();
            total += duals_b.iter().zip(&exposure).map(|(b, p)| b * (model.p_min - p).max(0.0)).sum::<f64>();
        }
        let dual_norm = libm::sqrt(duals_a.iter().chain(&duals_b).fold(0.0, |acc, d| acc + d * d));
        let step = GradStep {
            iteration: t,
            total,
            cvar,
            card,
            prod,
            bin: if method == Method::SCGrad { bin } else { 0.0 },
            temperature: eta,
            dual_norm,
        };
        trace.steps.push(step);
        if !total.is_finite() {
            return Ok(Err(Diverged { iteration: t, trace }));
        }
        if cfg.tolerance > 0.0
            && eta <= cfg.eta_min
            && (total - prev_total).abs() <= cfg.tolerance * total.abs().max(1.0)
        {
            break;
        }
        prev_total = total;

        grad.iter_mut().for_each(|g| *g = 0.0);
        let gw = &mut grad[..m * n];
        model.add_grad_w(LossTerm::Util, &w, tau, 1.0, gw);
        model.add_grad_w(LossTerm::Card, &w, tau, card_w, gw);
        model.add_grad_w(LossTerm::Prod, &w, tau, prod_w, gw);
        if bin_w > 0.0 {
            model.add_grad_w(LossTerm::Bin, &w, tau, bin_w, gw);
        }
        if method == Method::AugLag {
            for (i, row) in gw.chunks_mut(n).enumerate() {
                row.iter_mut().zip(&exposure).zip(&duals_b).for_each(|((g, &p), &b)| {
                    *g += duals_a[i] - if p < model.p_min { b } else { 0.0 };
                });
            }
        }
        chain(gw, &w, eta);
        grad[m * n] = model.tau_grad(&w, tau);
        stepper.apply(&mut z, &grad);
        z[m * n] = z[m * n].max(0.0);
        iterations += 1;

        if method == Method::AugLag && (t + 1) % cfg.dual_period == 0 {
            let w = model.weights(&z[..m * n], eta);
            for (a, c) in duals_a.iter_mut().zip(model.row_sums(&w)) {
                *a += cfg.dual_step * (c - model.k);
            }
            for (b, p) in duals_b.iter_mut().zip(model.exposures(&w)) {
                *b = (*b + cfg.dual_step * (model.p_min - p).max(0.0)).max(0.0);
            }
        }
    }

    let tau = z[m * n];
    let w = model.weights(&z[..m * n], eta);
    if w.iter().any(|x| !x.is_finite()) {
        return Ok(Err(Diverged { iteration: trace.steps.len(), trace }));
    }
    let objective = model.loss(LossTerm::Util, &w, tau);
    let mut values = w.clone();
    values.push(tau);
    let sol = FractionalSolution {
        weights: Allocation::from_solver(m, n, &w),
        values,
        objective,
        duals: duals_a.into_iter().chain(duals_b).collect(),
        vertex: false,
        iterations,
    };
    Ok(Ok((sol, trace)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::round_topk;
    use crate::metrics::consumer_utilities;
    use crate::types::{FairnessParams, GroupPartition, Normalization, ProducerValues, RelevanceMatrix};

    fn random_problem(seed: u64, m: usize, n: usize, k: usize, gamma: f64) -> Problem {
        let mut rng = PortableRng::new(seed);
        let scores = (0..m * n).map(|_| rng.uniform()).collect();
        let rho = RelevanceMatrix::new(m, n, scores).unwrap();
        let groups = GroupPartition::new((0..m).map(|i| i % 3).collect(), 3).unwrap();
        let params = FairnessParams::new(k, Objective::Cvar).with_alpha(0.5).with_gamma(gamma);
        Problem::new(rho, groups, ProducerValues::uniform(n), params).unwrap()
    }

    #[test]
    fn temperature_schedule() {
        let cfg = GradConfig { anneal_rate: 0.99, eta0: 1.0, eta_min: 0.01, ..GradConfig::default() };
        assert_eq!(temperature(0, &cfg), 1.0);
        assert_eq!(temperature(100_000, &cfg), 0.01);
        assert!((temperature(100, &cfg) - 0.99f64.powi(100)).abs() < 1e-12);
        assert!((temperature(100, &cfg) - 0.366).abs() < 1e-3);
    }

    #[test]
    fn binarization_term() {
        let p = random_problem(1, 3, 2, 1, 0.0);
        let model = GradModel::new(&p).unwrap();
        assert_eq!(model.loss(LossTerm::Bin, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0], 0.0), 0.0);
        assert_eq!(model.loss(LossTerm::Bin, &[0.5; 6], 0.0), 6.0 / 16.0);
        let mut g = vec![0.0; 6];
        model.add_grad_w(LossTerm::Bin, &[0.5; 6], 0.0, 1.0, &mut g);
        assert!(g.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..3 {
            let p = random_problem(seed, 6, 5, 2, 1.0);
            let model = GradModel::new(&p).unwrap();
            let mut rng = PortableRng::substream(seed, 1);
            let z: Vec<f64> = (0..30).map(|_| rng.normal(0.0, 1.0)).collect();
            let eta = 0.7;
            let tau = 0.05;
            for term in [LossTerm::Util, LossTerm::Card, LossTerm::Prod, LossTerm::Bin] {
                let g = model.grad_z(term, &z, eta, tau);
                for v in 0..z.len() {
                    let mut zp = z.clone();
                    zp[v] += h;
                    let mut zm = z.clone();
                    zm[v] -= h;
                    let fd = (model.loss(term, &model.weights(&zp, eta), tau)
                        - model.loss(term, &model.weights(&zm, eta), tau))
                        / (2.0 * h);
                    let err = (fd - g[v]).abs() / g[v].abs().max(fd.abs()).max(1e-8);
                    assert!(err < 1e-4 || (fd - g[v]).abs() < 1e-10, "{term:?} var {v}: {fd} vs {}", g[v]);
                }
            }
        }
    }

    #[test]
    fn single_consumer_recovers_top_k() {
        let rho = RelevanceMatrix::from_rows(&[vec![0.3, 0.9, 0.1, 0.7, 0.5]]).unwrap();
        let p = Problem::ungrouped(rho, FairnessParams::new(2, Objective::Cvar)).unwrap();
        for solve in [solve_auglag, solve_scgrad] {
            let (sol, trace) = solve(&p, &GradConfig::default()).unwrap().unwrap();
            let top = round_topk(&sol, 2).unwrap();
            assert_eq!(top.selections(), vec![vec![1, 3]]);
            let u = consumer_utilities(&p.rho, &top, 2, Normalization::TopK).unwrap();
            assert_eq!(u, vec![1.0]);
            assert!(trace.steps.windows(2).all(|s| s[1].temperature <= s[0].temperature));
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let p = random_problem(4, 8, 6, 2, 0.5);
        let cfg =
            GradConfig { iterations: 300, init: GradInit::Random { sigma: 0.5 }, seed: 9, ..GradConfig::default() };
        let a = solve_auglag(&p, &cfg).unwrap().unwrap();
        let b = solve_auglag(&p, &cfg).unwrap().unwrap();
        assert_eq!(a, b);
        assert!(a.1.steps.len() <= 300);
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        let p = random_problem(2, 4, 4, 1, 0.0);
        let cfg = GradConfig { card_weight: 1e308, iterations: 50, ..GradConfig::default() };
        let d = solve_scgrad(&p, &cfg).unwrap().unwrap_err();
        assert!(!d.trace.steps.is_empty());
        assert!(matches!(Error::from(d), Error::Numerical(_)));
    }

    #[test]
    fn max_min_rejected_and_config_validated() {
        let p = random_problem(3, 3, 3, 1, 0.0);
        let mm = p.with_params(FairnessParams::new(1, Objective::MaxMin)).unwrap();
        assert!(solve_auglag(&mm, &GradConfig::default()).is_err());
        let bad = GradConfig { anneal_rate: 1.0, ..GradConfig::default() };
        assert!(solve_scgrad(&p, &bad).is_err());
    }
}
