//! Unit-supply purchase simulation.
//!
//! Consumers arrive one at a time. Each scores the producers that are still
//! in stock by `w_ij * rho_ij`, takes the top `k` (ties to the lower index)
//! and buys each with probability `rho_ij`. With the default pool, slots
//! freed by sell-outs are refilled from the rest of the catalog. A purchased producer is sold out
//! for everyone after. Slot `s` of consumer `i` draws from the substream
//! `(derive_seed(seed, [i]), s)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dimension, invalid, Result};
use crate::rng::{derive_seed, PortableRng};
use crate::types::{Allocation, ProducerValues, RelevanceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConsumerOrder {
    AsGiven,
    /// Fisher-Yates shuffle seeded from the simulation seed.
    Shuffled,
}

/// Producers a consumer may be shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CandidatePool {
    /// Every producer still in stock; sold-out slots are refilled from the
    /// rest of the catalog by relevance.
    #[default]
    Unsold,
    /// Only the consumer's own allocated producers that are still in stock.
    Allocated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Purchase {
    /// Position of the consumer in the arrival order.
    pub step: usize,
    pub consumer: usize,
    pub producer: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransactionLog {
    pub events: Vec<Purchase>,
    pub sold: Vec<bool>,
}

impl TransactionLog {
    pub fn purchase_count(&self) -> usize {
        self.events.len()
    }

    pub fn sold_count(&self) -> usize {
        self.sold.iter().filter(|&&s| s).count()
    }
}

pub fn simulate_purchases(
    rho: &RelevanceMatrix,
    w: &Allocation,
    k: usize,
    values: &ProducerValues,
    seed: u64,
    order: ConsumerOrder,
) -> Result<TransactionLog> {
    simulate_purchases_in(rho, w, k, values, seed, order, CandidatePool::Unsold)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_purchases_in(
    rho: &RelevanceMatrix,
    w: &Allocation,
    k: usize,
    values: &ProducerValues,
    seed: u64,
    order: ConsumerOrder,
    pool: CandidatePool,
) -> Result<TransactionLog> {
    let (m, n) = (rho.m(), rho.n());
    if w.m() != m || w.n() != n || values.len() != n {
        return Err(dimension(format!("relevance {m}x{n}, allocation {}x{}, {} values", w.m(), w.n(), values.len())));
    }
    if !w.is_binary() {
        return Err(invalid("market simulation needs a binary allocation"));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("k={k} must satisfy 1 <= k <= n={n}")));
    }
    let mut arrivals: Vec<usize> = (0..m).collect();
    if order == ConsumerOrder::Shuffled {
        PortableRng::substream(seed, u64::MAX).shuffle(&mut arrivals);
    }
    let mut sold = vec![false; n];
    let mut events = Vec::new();
    let mut candidates: Vec<usize> = Vec::with_capacity(n);
    for (step, &i) in arrivals.iter().enumerate() {
        let (r, wr) = (rho.row(i), w.row(i));
        candidates.clear();
        match pool {
            CandidatePool::Unsold => candidates.extend((0..n).filter(|&j| !sold[j])),
            CandidatePool::Allocated => candidates.extend((0..n).filter(|&j| !sold[j] && wr[j] > 0.5)),
        }
        if candidates.is_empty() {
            continue;
        }
        candidates.sort_by(|&a, &b| (wr[b] * r[b]).total_cmp(&(wr[a] * r[a])).then(a.cmp(&b)));
        candidates.truncate(k);
        let base = derive_seed(seed, &[i as u64]);
        for (slot, &j) in candidates.iter().enumerate() {
            let mut rng = PortableRng::substream(base, slot as u64);
            if rng.bernoulli(r[j]) {
                sold[j] = true;
                events.push(Purchase { step, consumer: i, producer: j, value: values.as_slice()[j] });
            }
        }
    }
    Ok(TransactionLog { events, sold })
}

/// Distinct producers sold over catalog size.
pub fn sell_through_rate(log: &TransactionLog, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    log.sold_count() as f64 / n as f64
}

pub fn realized_gmv(log: &TransactionLog, values: &ProducerValues) -> f64 {
    log.sold.iter().zip(values.as_slice()).filter(|(s, _)| **s).fold(0.0, |acc, (_, v)| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(m: usize, n: usize, r: f64, k: usize) -> (RelevanceMatrix, Allocation) {
        let rho = RelevanceMatrix::new(m, n, vec![r; m * n]).unwrap();
        let sel: Vec<Vec<usize>> = (0..m).map(|_| (0..k).collect()).collect();
        (rho, Allocation::from_selections(n, &sel).unwrap())
    }

    #[test]
    fn certain_purchases_exhaust_supply() {
        for (m, n, k) in [(5, 20, 2), (10, 8, 3), (3, 3, 1)] {
            let (rho, w) = setup(m, n, 1.0, k);
            let log = simulate_purchases(&rho, &w, k, &ProducerValues::uniform(n), 1, ConsumerOrder::AsGiven).unwrap();
            assert_eq!(log.purchase_count(), (m * k).min(n));
            assert_eq!(sell_through_rate(&log, n), (m * k).min(n) as f64 / n as f64);
            assert_eq!(realized_gmv(&log, &ProducerValues::uniform(n)), log.purchase_count() as f64);
        }
    }

    #[test]
    fn zero_relevance_buys_nothing() {
        let (rho, w) = setup(4, 6, 0.0, 2);
        let log = simulate_purchases(&rho, &w, 2, &ProducerValues::uniform(6), 1, ConsumerOrder::Shuffled).unwrap();
        assert!(log.events.is_empty());
        assert_eq!(sell_through_rate(&log, 6), 0.0);
        assert_eq!(realized_gmv(&log, &ProducerValues::uniform(6)), 0.0);
    }

    #[test]
    fn runs_repeat_and_producers_sell_once() {
        let mut rng = PortableRng::new(2);
        let rho = RelevanceMatrix::new(30, 12, (0..360).map(|_| rng.uniform()).collect()).unwrap();
        let sel: Vec<Vec<usize>> = (0..30).map(|i| vec![i % 12, (i + 5) % 12]).collect();
        let w = Allocation::from_selections(12, &sel).unwrap();
        let v = ProducerValues::uniform(12);
        for order in [ConsumerOrder::AsGiven, ConsumerOrder::Shuffled] {
            let a = simulate_purchases(&rho, &w, 2, &v, 8, order).unwrap();
            let b = simulate_purchases(&rho, &w, 2, &v, 8, order).unwrap();
            assert_eq!(a, b);
            let mut seen: Vec<usize> = a.events.iter().map(|e| e.producer).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), a.events.len());
            assert!(a.events.windows(2).all(|e| e[0].step <= e[1].step));
        }
    }

    #[test]
    fn stats_examples() {
        let log = TransactionLog {
            events: vec![
                Purchase { step: 0, consumer: 0, producer: 1, value: 5.0 },
                Purchase { step: 1, consumer: 1, producer: 4, value: 3.0 },
                Purchase { step: 1, consumer: 1, producer: 7, value: 1.0 },
            ],
            sold: (0..10).map(|j| [1, 4, 7].contains(&j)).collect(),
        };
        assert_eq!(sell_through_rate(&log, 10), 0.3);
        let mut v = vec![1.0; 10];
        v[1] = 5.0;
        v[4] = 3.0;
        v[7] = 0.0;
        assert_eq!(realized_gmv(&log, &ProducerValues::new(v).unwrap()), 8.0);
    }

    #[test]
    fn allocated_pool_never_leaves_the_allocation() {
        let (rho, w) = setup(6, 10, 1.0, 2);
        let v = ProducerValues::uniform(10);
        let log = simulate_purchases_in(&rho, &w, 2, &v, 3, ConsumerOrder::AsGiven, CandidatePool::Allocated).unwrap();
        // everyone is shown producers 0 and 1, which the first consumer buys
        assert_eq!(log.events.iter().map(|e| e.producer).collect::<Vec<_>>(), vec![0, 1]);
        let refill = simulate_purchases(&rho, &w, 2, &v, 3, ConsumerOrder::AsGiven).unwrap();
        assert_eq!(refill.purchase_count(), 10);
    }

    #[test]
    fn rejects_fractional_allocation() {
        let rho = RelevanceMatrix::new(1, 2, vec![0.5; 2]).unwrap();
        let w = Allocation::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(simulate_purchases(&rho, &w, 1, &ProducerValues::uniform(2), 0, ConsumerOrder::AsGiven).is_err());
    }
}
