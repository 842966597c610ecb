//! Simulation and numerical analysis of two stochastic models on an
//! infinite array of bits.
//!
//! At every step an index is drawn from a fixed distribution on the
//! positive integers and the selected bit changes state:
//!
//! * **BF (binary flipping)** — the bit toggles between idle and active;
//! * **DB (damaged bits)** — the bit advances idle -> active -> damaged and
//!   then never changes again.
//!
//! The crate simulates both chains in discrete time and as continuous-time
//! snapshots (each bit flips at exponential rate `p_k`, total rate 1),
//! evaluates the closed-form quantities attached to them (per-bit state
//! probabilities, active-count series, ground-state occupancy integrals,
//! fractional-moment exponents), classifies recurrence or transience per
//! distribution family, and verifies the structural facts by Monte Carlo:
//! return-time statistics, tail indices, a stochastic-domination coupling
//! and a CLT check for the number of active bits.
//!
//! Conventions: bit indices are 1-based; the ground state is "no active
//! bits" (damaged bits allowed); and the continuous-time BF active
//! probability of bit `k` at time `t` is `(1 - exp(-2 p_k t))/2`, the form
//! that follows from the Poisson parity computation.
//!
//! Entry points: [`distributions::BitDistribution`] for the index law,
//! [`engine`] for simulation, [`analytics`] for closed forms, [`coupling`]
//! for the domination construction, [`estimators`] for Monte Carlo
//! post-processing, and [`cli`] for the JSON-config command-line driver.
//! The `examples/` directory exercises each capability end to end.

// Negated comparisons like `!(t > 0.0)` are deliberate: they reject NaN
// where `t <= 0.0` would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cli;
pub mod coupling;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod stats;

pub use distributions::{BitDistribution, Classification, DistSpec, Family};
pub use engine::{BitState, Model, ReturnOutcome, SnapshotMethod, Tau};
pub use error::{Error, Result};
