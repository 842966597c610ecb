//! Coordinate-wise domination coupling for the BF chain, and the
//! shared-randomness coupling of the two models.
//!
//! The construction runs two BF chains off one stream of uniforms: the
//! lower chain starts from the ground state, the upper chain from i.i.d.
//! Bernoulli(1/2) coordinates. Outside a finite buffer `{1, .., K-1}`
//! (where `K` is the smallest index with `sum_{i>=K} p_i <= 1/2`), any
//! index where the chains disagree has its uniform-interval mass swapped
//! with mass of equal length in the buffer, so a flip either lands on both
//! chains at once or repairs a disagreement. Coordinates `k >= K` then stay
//! dominated: lower <= upper at every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{BitDistribution, IndexSampler};
use crate::engine::{BitState, Model, ReturnOutcome, SparseBits, Tau, Transition};
use crate::error::{Error, Result};

/// Smallest `k` with `tail(k-1) <= 1/2`; always >= 2, so the buffer
/// `{1, .., K-1}` is never empty.
pub fn buffer_index(dist: &BitDistribution) -> u32 {
    let mut k = 1u32;
    while dist.tail(k - 1) > 0.5 {
        k += 1;
    }
    k
}

/// Two synchronized BF chains with the domination invariant enforced
/// outside the buffer.
///
/// The upper chain's stationary initial condition has infinitely many
/// coordinates; a coordinate's initial Bernoulli(1/2) value is drawn from
/// a substream keyed by its index the first time it is read.
#[derive(Debug)]
pub struct CoupledPair<'a> {
    sampler: IndexSampler<'a>,
    buffer_k: u32,
    lower: SparseBits,
    upper: SparseBits,
    upper_known: SparseBits,
    init_seed: u64,
    step: u64,
}

impl<'a> CoupledPair<'a> {
    pub fn new(dist: &'a BitDistribution, init_seed: u64) -> Self {
        CoupledPair {
            sampler: dist.sampler(),
            buffer_k: buffer_index(dist),
            lower: SparseBits::new(),
            upper: SparseBits::new(),
            upper_known: SparseBits::new(),
            init_seed,
            step: 0,
        }
    }

    pub fn buffer_k(&self) -> u32 {
        self.buffer_k
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn lower(&self) -> &SparseBits {
        &self.lower
    }

    /// Upper-chain coordinates materialized so far.
    pub fn upper_known(&self) -> &SparseBits {
        &self.upper_known
    }

    /// Current value of an upper coordinate, materializing its initial
    /// condition on first read.
    pub fn upper_bit(&mut self, k: u32) -> bool {
        if !self.upper_known.contains(k) {
            self.upper_known.insert(k);
            let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
            rng.set_stream(k as u64);
            if rng.random::<bool>() {
                self.upper.insert(k);
            }
        }
        self.upper.contains(k)
    }

    /// Override an upper coordinate (audit and test harness hook for
    /// constructing specific discrepancy sets).
    pub fn set_upper_bit(&mut self, k: u32, value: bool) {
        self.upper_known.insert(k);
        if value {
            self.upper.insert(k);
        } else {
            self.upper.remove(k);
        }
    }

    /// Is `k` a current discrepancy (`k >= K`, lower idle, upper active)?
    pub fn is_discrepancy(&mut self, k: u32) -> bool {
        k >= self.buffer_k && !self.lower.contains(k) && self.upper_bit(k)
    }

    /// Currently known discrepancy indices.
    pub fn known_discrepancies(&self) -> Vec<u32> {
        self.upper_known
            .iter()
            .filter(|&k| k >= self.buffer_k && self.upper.contains(k) && !self.lower.contains(k))
            .collect()
    }

    /// The measure-preserving reflection: `1 - u` when the index drawn by
    /// `u` (or by `1 - u`) is a discrepancy, else `u`. An involution for
    /// any fixed discrepancy set.
    pub fn swap_map(&mut self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 1.0);
        let k1 = self.sampler.index_for(u);
        if self.is_discrepancy(k1) {
            return 1.0 - u;
        }
        let k2 = self.sampler.index_for(1.0 - u);
        if self.is_discrepancy(k2) {
            return 1.0 - u;
        }
        u
    }

    /// Advance both chains off the same uniform: the lower flips at
    /// `F^-1(u)`, the upper at `F^-1(s_n(u))`. Returns the pair of flipped
    /// indices. Errs if the exit state violates domination (never expected;
    /// a test-failure signal).
    pub fn coupled_step(&mut self, u: f64) -> Result<(u32, u32)> {
        debug_assert!(u > 0.0 && u < 1.0);
        let lo_idx = self.sampler.index_for(u);
        let su = if self.is_discrepancy(lo_idx) {
            1.0 - u
        } else {
            let mirror = self.sampler.index_for(1.0 - u);
            if self.is_discrepancy(mirror) {
                1.0 - u
            } else {
                u
            }
        };
        let hi_idx = self.sampler.index_for(su);
        self.lower.toggle(lo_idx);
        if self.upper_bit(hi_idx) {
            self.upper.remove(hi_idx);
        } else {
            self.upper.insert(hi_idx);
        }
        self.step += 1;
        for k in [lo_idx, hi_idx] {
            if k >= self.buffer_k && self.lower.contains(k) && !self.upper.contains(k) {
                return Err(Error::Internal(format!(
                    "domination violated at coordinate {k} on step {}",
                    self.step
                )));
            }
        }
        Ok((lo_idx, hi_idx))
    }

    /// Count domination violations over every coordinate `>= K` touched or
    /// materialized so far. Untouched coordinates hold the invariant
    /// vacuously (the lower chain starts at zero and never flipped them).
    pub fn audit_violations(&self) -> u64 {
        let mut violations = 0;
        for k in self.lower.iter() {
            if k >= self.buffer_k && !(self.upper_known.contains(k) && self.upper.contains(k)) {
                violations += 1;
            }
        }
        violations
    }
}

/// Run one BF trajectory and read the DB trajectory off the same index
/// sequence (a bit selected while active becomes damaged). Returns
/// `(db, bf)` outcomes; `tau_db <= tau_bf` holds pointwise whenever both
/// are finite, because a grounded BF configuration has all flip counts
/// even, which leaves the derived DB chain without active bits.
pub fn couple_bf_db<R: Rng + ?Sized>(
    dist: &BitDistribution,
    horizon: u64,
    rng: &mut R,
) -> (ReturnOutcome, ReturnOutcome) {
    let mut bf = BitState::ground(Model::Bf);
    let mut db = BitState::ground(Model::Db);
    let mut sampler = dist.sampler();
    let mut bf_done: Option<u64> = None;
    let mut db_done: Option<u64> = None;
    let mut bf_peak = 0u32;
    let mut db_peak = 0u32;
    for n in 1..=horizon {
        let idx = sampler.draw(rng);
        if bf_done.is_none() {
            if bf.step_bf(idx) == Transition::Activated && idx > bf_peak {
                bf_peak = idx;
            }
            if bf.is_ground() {
                bf_done = Some(n);
            }
        }
        if db_done.is_none() {
            if db.step_db(idx) == Transition::Activated && idx > db_peak {
                db_peak = idx;
            }
            if db.is_ground() {
                db_done = Some(n);
            }
        }
        if bf_done.is_some() && db_done.is_some() {
            break;
        }
    }
    let wrap = |done: Option<u64>, peak: u32| ReturnOutcome {
        tau: match done {
            Some(n) => Tau::Returned(n),
            None => Tau::Censored(horizon),
        },
        m0: 0,
        peak_m: peak,
    };
    (wrap(db_done, db_peak), wrap(bf_done, bf_peak))
}

/// Outcome of a batch domination audit.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DominationAudit {
    pub runs: u64,
    pub steps_per_run: u64,
    pub buffer_k: u32,
    /// Domination violations across all runs (per-step and final sweep).
    pub violations: u64,
    pub swap_samples: usize,
    /// One-sample KS of the swap-mapped uniforms against Uniform(0,1).
    pub swap_ks_statistic: f64,
    pub swap_ks_p: f64,
}

/// Run `runs` independent coupled chains for `steps_per_run` steps each,
/// counting domination violations and KS-testing the swap-mapped uniforms
/// for uniformity.
pub fn run_domination_audit(
    dist: &BitDistribution,
    runs: u64,
    steps_per_run: u64,
    master_seed: u64,
) -> DominationAudit {
    let per_run: Vec<(u64, Vec<f64>)> = crate::engine::run_indexed(runs, |run| {
        let mut rng = crate::engine::replica_rng(master_seed, run);
        let init_seed = rng.random::<u64>();
        let mut pair = CoupledPair::new(dist, init_seed);
        let mut violations = 0u64;
        let mut mapped = Vec::with_capacity(steps_per_run as usize);
        for _ in 0..steps_per_run {
            let u = crate::distributions::open_unit(&mut rng);
            mapped.push(pair.swap_map(u));
            if pair.coupled_step(u).is_err() {
                violations += 1;
            }
        }
        violations += pair.audit_violations();
        (violations, mapped)
    });
    let violations: u64 = per_run.iter().map(|(v, _)| v).sum();
    let mapped: Vec<f64> = per_run.into_iter().flat_map(|(_, m)| m).collect();
    let ks = crate::stats::ks_one_sample(&mapped, |x| x.clamp(0.0, 1.0));
    DominationAudit {
        runs,
        steps_per_run,
        buffer_k: buffer_index(dist),
        violations,
        swap_samples: mapped.len(),
        swap_ks_statistic: ks.statistic,
        swap_ks_p: ks.p_value,
    }
}

/// Outcome of a batch tau ordering audit over shared-randomness BF/DB runs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PairOrderAudit {
    pub pairs: u64,
    pub horizon: u64,
    pub both_finite: u64,
    /// Runs where the DB return came strictly after the BF return.
    pub order_violations: u64,
    /// Fraction of both-finite runs with tau_db <= tau_bf.
    pub ordered_fraction: f64,
}

pub fn run_pair_order_audit(
    dist: &BitDistribution,
    pairs: u64,
    horizon: u64,
    master_seed: u64,
) -> PairOrderAudit {
    let outcomes = crate::engine::run_replicas(pairs, master_seed, |_, rng| {
        let (db, bf) = couple_bf_db(dist, horizon, rng);
        match (db.steps(), bf.steps()) {
            (Some(d), Some(b)) => (true, d > b),
            // BF finite with DB censored would also violate the ordering.
            (None, Some(_)) => (false, true),
            _ => (false, false),
        }
    });
    let both_finite = outcomes.iter().filter(|(f, _)| *f).count() as u64;
    let order_violations = outcomes.iter().filter(|(_, v)| *v).count() as u64;
    let ordered =
        both_finite.saturating_sub(outcomes.iter().filter(|(f, v)| *f && *v).count() as u64);
    PairOrderAudit {
        pairs,
        horizon,
        both_finite,
        order_violations,
        ordered_fraction: if both_finite > 0 {
            ordered as f64 / both_finite as f64
        } else {
            1.0
        },
    }
}
