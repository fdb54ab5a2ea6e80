//! Finite-state laboratory for temporally non-homogeneous Markov chains.
//!
//! The crate builds chains step by step from per-step transition kernels,
//! attaches additive reward functionals with a bounded look-ahead window,
//! and computes their value-to-go / martingale-difference decomposition
//! exactly on the grid. On top of that sit:
//!
//! - the Dobrushin contraction / minimal ergodic coefficient calculus
//!   ([`kernel`]),
//! - exact first and second moments of the total reward plus executable
//!   checks of the contraction, oscillation, and variance inequalities
//!   ([`decompose`], [`bounds`]),
//! - two finite-horizon dynamic programs that induce such chains — a
//!   base-stock inventory model ([`inventory`]) and online alternating
//!   subsequence selection ([`altsub`]),
//! - seeded, reproducible Monte Carlo sampling with normality diagnostics
//!   ([`montecarlo`], [`normal`]),
//! - canonical fixtures for property tests ([`fixtures`]).
//!
//! Everything is `no_std` + `alloc`; IO, serialization, and the experiment
//! driver live in the companion CLI crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod altsub;
pub mod bounds;
pub mod chain;
pub mod decompose;
pub mod error;
pub mod fixtures;
pub mod fmath;
pub mod inventory;
pub mod kernel;
pub mod montecarlo;
pub mod normal;

pub use chain::{ChainLaw, RewardFunctionArray};
pub use decompose::DecompositionReport;
pub use error::{Error, Result};
pub use kernel::{CoefficientReport, KernelSequence, StateGrid, StochasticKernel};
pub use montecarlo::{CltReport, SampleBatch};
