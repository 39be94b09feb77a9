//! Fair division of random indivisible items.
//!
//! Allocation algorithms (round-robin variants, threshold and two-stage
//! matchings, EFX constructions), the greedy envy-free assignment with its
//! Markov-chain and ODE description, exhaustive oracles for tiny instances,
//! and a seeded Monte Carlo harness that measures how often each fairness
//! notion is achieved.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocators;
pub mod assignment_dynamics;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use allocators::{Algorithm, AllocatorResult};
pub use distributions::{sample_conditional_max, DistributionSpec};
pub use error::{Error, Result};
pub use model::{Allocation, Assignment, FairnessReport, Instance, RankingProfile};
pub use rng::RngStream;
