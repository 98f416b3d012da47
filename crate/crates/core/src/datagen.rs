//! SimRec synthetic relevance matrices and producer values.
//!
//! Consumer `i` in group `g` sees producer `j` at position `x_j = j / (n - 1)`
//! with relevance
//!
//! ```text
//! clip(1 - ln(1 + b_g x_j) / ln(1 + b_g) + eps_ij, low, high),  eps_ij ~ N(0, sigma^2)
//! ```
//!
//! Group sizes follow a Zipf law apportioned by largest remainder. Row `i`
//! draws its noise from substream `(seed, i)`, so rows can be generated in any
//! order.
//!
//! With [`ItemOrder::Shared`] every consumer ranks producers the same way
//! (`x_j` increasing in `j`). [`ItemOrder::PerConsumer`] gives each consumer its
//! own random permutation of the grid, drawn from the same substream before
//! the noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::metrics::top_k_indices;
use crate::rng::PortableRng;
use crate::types::{GroupPartition, ProducerValues, RelevanceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ItemOrder {
    #[default]
    Shared,
    PerConsumer,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimRecConfig {
    pub m: usize,
    pub n: usize,
    pub groups: usize,
    pub zipf_exponent: f64,
    pub noise_sigma: f64,
    pub clip_low: f64,
    pub clip_high: f64,
    /// Per-group decay rates; `None` means `20 / (1 + g)`.
    pub betas: Option<Vec<f64>>,
    pub item_order: ItemOrder,
    pub seed: u64,
}

impl Default for SimRecConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            n: 1000,
            groups: 10,
            zipf_exponent: 1.0,
            noise_sigma: 0.2,
            clip_low: 0.1,
            clip_high: 1.0,
            betas: None,
            item_order: ItemOrder::Shared,
            seed: 0,
        }
    }
}

impl SimRecConfig {
    pub fn betas(&self) -> Vec<f64> {
        match &self.betas {
            Some(b) => b.clone(),
            None => (0..self.groups).map(|g| 20.0 / (1.0 + g as f64)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(invalid(format!("m={} and n={} must be positive", self.m, self.n)));
        }
        if self.groups == 0 || self.groups > self.m {
            return Err(invalid(format!("G={} must satisfy 1 <= G <= m={}", self.groups, self.m)));
        }
        if !(0.0..=1.0).contains(&self.clip_low)
            || !(0.0..=1.0).contains(&self.clip_high)
            || self.clip_low >= self.clip_high
        {
            return Err(invalid(format!(
                "clip bounds [{}, {}] must be increasing within [0, 1]",
                self.clip_low, self.clip_high
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid(format!("noise_sigma={} must be finite and nonnegative", self.noise_sigma)));
        }
        if !self.zipf_exponent.is_finite() || self.zipf_exponent < 0.0 {
            return Err(invalid(format!("zipf_exponent={} must be finite and nonnegative", self.zipf_exponent)));
        }
        let betas = self.betas();
        if betas.len() != self.groups {
            return Err(invalid(format!("{} betas for G={}", betas.len(), self.groups)));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(invalid(format!("beta={b} must be positive")));
        }
        Ok(())
    }
}

/// Group sizes proportional to `rank^-s`, summing to `m`, each at least 1.
pub fn zipf_sizes(m: usize, groups: usize, exponent: f64) -> Result<Vec<usize>> {
    if groups == 0 || groups > m {
        return Err(invalid(format!("cannot split m={m} consumers into G={groups} nonempty groups")));
    }
    let weights: Vec<f64> = (1..=groups).map(|r| libm::pow(r as f64, -exponent)).collect();
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| m as f64 * w / total).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let mut order: Vec<usize> = (0..groups).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - sizes[a] as f64, quotas[b] - sizes[b] as f64);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = sizes.iter().sum();
    for &g in order.iter().take(m - assigned) {
        sizes[g] += 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let max = *sizes.iter().max().expect("groups > 0");
        let donor = sizes.iter().rposition(|&s| s == max).expect("max exists");
        sizes[donor] -= 1;
        sizes[empty] += 1;
    }
    Ok(sizes)
}

/// Noise-free relevance before clipping.
pub fn decay(beta: f64, x: f64) -> f64 {
    1.0 - libm::log1p(beta * x) / libm::log1p(beta)
}

pub fn gen_simrec(config: &SimRecConfig) -> Result<(RelevanceMatrix, GroupPartition)> {
    config.validate()?;
    let sizes = zipf_sizes(config.m, config.groups, config.zipf_exponent)?;
    let groups = GroupPartition::from_sizes(&sizes)?;
    let betas = config.betas();
    let n = config.n;
    let xs: Vec<f64> = (0..n).map(|j| if n > 1 { j as f64 / (n - 1) as f64 } else { 0.0 }).collect();
    let mut scores = vec![0.0; config.m * n];
    let mut row_xs = xs.clone();
    for (i, row) in scores.chunks_mut(n).enumerate() {
        let beta = betas[groups.group_of(i)];
        let mut rng = PortableRng::substream(config.seed, i as u64);
        if config.item_order == ItemOrder::PerConsumer {
            row_xs.copy_from_slice(&xs);
            rng.shuffle(&mut row_xs);
        }
        for (s, &x) in row.iter_mut().zip(&row_xs) {
            let noisy = decay(beta, x) + rng.normal(0.0, config.noise_sigma);
            *s = noisy.clamp(config.clip_low, config.clip_high);
        }
    }
    Ok((RelevanceMatrix::new(config.m, n, scores)?, groups))
}

/// How producer values are obtained. File input is handled by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ValueMode {
    /// `v_j = 1 / (1 + c_j)` with `c_j` the number of consumers whose
    /// unconstrained top-k contains `j`.
    InversePopularity,
}

pub fn popularity(rho: &RelevanceMatrix, k: usize) -> Vec<usize> {
    let mut counts = vec![0; rho.n()];
    for row in rho.rows() {
        for j in top_k_indices(row, k) {
            counts[j] += 1;
        }
    }
    counts
}

pub fn gen_values(rho: &RelevanceMatrix, k: usize, mode: ValueMode) -> Result<ProducerValues> {
    if k == 0 || k > rho.n() {
        return Err(invalid(format!("k={k} must satisfy 1 <= k <= n={}", rho.n())));
    }
    match mode {
        ValueMode::InversePopularity => {
            ProducerValues::new(popularity(rho, k).into_iter().map(|c| 1.0 / (1.0 + c as f64)).collect())
        }
    }
}
