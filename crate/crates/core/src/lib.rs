//! Fairness-constrained top-k allocation for two-sided markets.
//!
//! Given a consumer x producer relevance matrix, the crate computes binary
//! allocations giving every consumer exactly `k` producers while trading
//! mean, max-min or group-CVaR consumer utility against producer exposure
//! floors and a GMV floor. Solvers:
//!
//! - [`exact`]: LP-bounded branch and bound on the binary program.
//! - [`lp`]: bounded-variable simplex on the relaxation plus hard,
//!   probabilistic and top-k rounding.
//! - [`grad`]: augmented Lagrangian and soft-penalty gradient descent over a
//!   temperature-annealed sigmoid parameterization.
//! - [`oracle`]: exhaustive enumeration for tiny instances.
//!
//! [`datagen`] builds synthetic relevance matrices and [`marketsim`] replays
//! allocations through a unit-supply purchase simulation.
//!
//! The crate is `no_std` + `alloc`; the default `std` feature only adds wall
//! clock timing to branch and bound.
#![cfg_attr(not(feature = "std"), no_std)]
// NaN must fail parameter checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod datagen;
pub mod error;
pub mod exact;
pub mod grad;
pub mod lp;
pub mod marketsim;
pub mod metrics;
pub mod oracle;
pub mod program;
pub mod rng;
mod simplex;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    Allocation, FairnessParams, GroupPartition, Normalization, Objective, Problem, ProducerValues, RelevanceMatrix,
    SolveResult, SolverStats, ViolationReport,
};
