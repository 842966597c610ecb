//! Discrete-time simulation of the binary-flipping (BF) and damaged-bits
//! (DB) chains, continuous-time snapshots via the rate-1 Poisson embedding,
//! and deterministic per-replica RNG streams for parallel experiments.

pub mod exact;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{open_unit, BitDistribution};
use crate::error::{Error, Result};

/// Per-bit snapshot truncation: bits are enumerated until the expected
/// number of events beyond the cut, `Q_K * t`, drops below this bound
/// (which is then a total-variation bound on the snapshot error).
pub const PER_BIT_TV_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Bf,
    Db,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Bf => "bf",
            Model::Db => "db",
        })
    }
}

/// Growable set of 1-based indices backed by a bit vector. The chains only
/// ever reach indices that are logarithmic in the run length, so the dense
/// words stay tiny while giving O(1) flips and counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseBits {
    words: Vec<u64>,
    count: usize,
}

impl SparseBits {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    fn slot(index: u32) -> (usize, u64) {
        debug_assert!(index >= 1);
        let pos = (index - 1) as usize;
        (pos >> 6, 1u64 << (pos & 63))
    }

    #[inline]
    pub fn contains(&self, index: u32) -> bool {
        let (w, mask) = Self::slot(index);
        self.words.get(w).is_some_and(|word| word & mask != 0)
    }

    /// Returns true if the index was newly inserted.
    pub fn insert(&mut self, index: u32) -> bool {
        let (w, mask) = Self::slot(index);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & mask == 0;
        if fresh {
            self.words[w] |= mask;
            self.count += 1;
        }
        fresh
    }

    /// Returns true if the index was present.
    pub fn remove(&mut self, index: u32) -> bool {
        let (w, mask) = Self::slot(index);
        if let Some(word) = self.words.get_mut(w) {
            if *word & mask != 0 {
                *word &= !mask;
                self.count -= 1;
                return true;
            }
        }
        false
    }

    /// Flip membership; returns the new membership state.
    #[inline]
    pub fn toggle(&mut self, index: u32) -> bool {
        let (w, mask) = Self::slot(index);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let word = &mut self.words[w];
        *word ^= mask;
        let now = *word & mask != 0;
        if now {
            self.count += 1;
        } else {
            self.count -= 1;
        }
        now
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn max_index(&self) -> Option<u32> {
        for (w, word) in self.words.iter().enumerate().rev() {
            if *word != 0 {
                let bit = 63 - word.leading_zeros() as usize;
                return Some((w * 64 + bit) as u32 + 1);
            }
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(w, word)| {
            let mut word = *word;
            std::iter::from_fn(move || {
                if word == 0 {
                    None
                } else {
                    let bit = word.trailing_zeros();
                    word &= word - 1;
                    Some((w * 64) as u32 + bit + 1)
                }
            })
        })
    }
}

/// What a single step did to the selected bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Activated,
    Deactivated,
    Damaged,
    Unchanged,
}

/// Sparse configuration of one chain: the set of active indices, the set of
/// damaged indices (DB only) and the step counter.
#[derive(Debug, Clone)]
pub struct BitState {
    model: Model,
    active: SparseBits,
    damaged: SparseBits,
    step: u64,
}

impl BitState {
    pub fn ground(model: Model) -> Self {
        BitState {
            model,
            active: SparseBits::new(),
            damaged: SparseBits::new(),
            step: 0,
        }
    }

    /// Start with the given bits active (used for conditional experiments
    /// that fix the largest initially active index).
    pub fn with_active(model: Model, indices: &[u32]) -> Result<Self> {
        let mut state = Self::ground(model);
        for &idx in indices {
            if idx == 0 {
                return Err(Error::domain("bit indices are 1-based"));
            }
            state.active.insert(idx);
        }
        Ok(state)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn damaged_count(&self) -> usize {
        self.damaged.len()
    }

    pub fn max_active(&self) -> Option<u32> {
        self.active.max_index()
    }

    /// Ground state: no active bits (damaged bits are allowed).
    pub fn is_ground(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_contains(&self, index: u32) -> bool {
        self.active.contains(index)
    }

    pub fn damaged_contains(&self, index: u32) -> bool {
        self.damaged.contains(index)
    }

    pub fn active_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.active.iter()
    }

    /// BF dynamics: the selected bit toggles idle <-> active.
    #[inline]
    pub fn step_bf(&mut self, index: u32) -> Transition {
        debug_assert_eq!(self.model, Model::Bf);
        self.step += 1;
        if self.active.toggle(index) {
            Transition::Activated
        } else {
            Transition::Deactivated
        }
    }

    /// DB dynamics: idle -> active -> damaged, and damaged stays damaged.
    #[inline]
    pub fn step_db(&mut self, index: u32) -> Transition {
        debug_assert_eq!(self.model, Model::Db);
        self.step += 1;
        if self.damaged.contains(index) {
            Transition::Unchanged
        } else if self.active.remove(index) {
            self.damaged.insert(index);
            Transition::Damaged
        } else {
            self.active.insert(index);
            Transition::Activated
        }
    }

    #[inline]
    pub fn apply(&mut self, index: u32) -> Transition {
        match self.model {
            Model::Bf => self.step_bf(index),
            Model::Db => self.step_db(index),
        }
    }
}

/// Return time of one run, or censoring at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tau {
    Returned(u64),
    Censored(u64),
}

/// Result of a single return-time run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnOutcome {
    pub tau: Tau,
    /// Largest initially active index (0 for a ground start).
    pub m0: u32,
    /// Largest index that was active at any point of the run.
    pub peak_m: u32,
}

impl ReturnOutcome {
    pub fn steps(&self) -> Option<u64> {
        match self.tau {
            Tau::Returned(n) => Some(n),
            Tau::Censored(_) => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self.tau, Tau::Censored(_))
    }
}

/// Run one chain until the first return to a ground state (no active bits),
/// or until `horizon` steps have elapsed. Censoring is a value, not an
/// error: unconditioned runs of a transient chain need not terminate.
pub fn run_return_time<R: Rng + ?Sized>(
    dist: &BitDistribution,
    mut state: BitState,
    horizon: u64,
    rng: &mut R,
) -> ReturnOutcome {
    let m0 = state.max_active().unwrap_or(0);
    let mut peak = m0;
    let mut sampler = dist.sampler();
    for n in 1..=horizon {
        let idx = sampler.draw(rng);
        if state.apply(idx) == Transition::Activated && idx > peak {
            peak = idx;
        }
        if state.is_ground() {
            return ReturnOutcome {
                tau: Tau::Returned(n),
                m0,
                peak_m: peak,
            };
        }
    }
    ReturnOutcome {
        tau: Tau::Censored(horizon),
        m0,
        peak_m: peak,
    }
}

/// Run the full BF chain from the ground state, stopping at the first step
/// where the leading `m` coordinates are all idle. Steps that touch bits
/// beyond `m` count toward the stopping time but not the stopping test.
pub fn run_projected_return<R: Rng + ?Sized>(
    m: u32,
    dist: &BitDistribution,
    horizon: u64,
    rng: &mut R,
) -> ReturnOutcome {
    assert!(m >= 1, "projection width must be >= 1");
    let mut state = BitState::ground(Model::Bf);
    let mut sampler = dist.sampler();
    let mut active_low = 0u32;
    let mut peak = 0u32;
    for n in 1..=horizon {
        let idx = sampler.draw(rng);
        match state.step_bf(idx) {
            Transition::Activated => {
                if idx > peak {
                    peak = idx;
                }
                if idx <= m {
                    active_low += 1;
                }
            }
            Transition::Deactivated if idx <= m => active_low -= 1,
            _ => {}
        }
        if active_low == 0 {
            return ReturnOutcome {
                tau: Tau::Returned(n),
                m0: 0,
                peak_m: peak,
            };
        }
    }
    ReturnOutcome {
        tau: Tau::Censored(horizon),
        m0: 0,
        peak_m: peak,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMethod {
    /// Draw the number of events from Poisson(t) and run that many discrete
    /// steps. Exact for every distribution.
    PoissonEmbed,
    /// Sample each bit independently from its continuous-time marginal,
    /// truncated once the remaining event mass is below [`PER_BIT_TV_TOL`].
    PerBit,
}

/// State of the continuous-time chain at time `t`.
pub fn sample_snapshot<R: Rng + ?Sized>(
    model: Model,
    dist: &BitDistribution,
    t: f64,
    method: SnapshotMethod,
    rng: &mut R,
) -> Result<BitState> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!(
            "snapshot time must be positive, got {t}"
        )));
    }
    match method {
        SnapshotMethod::PoissonEmbed => {
            let events = rand_distr::Poisson::new(t)
                .map_err(|e| Error::domain(format!("poisson({t}): {e}")))?;
            let n: f64 = rng.sample(events);
            let mut state = BitState::ground(model);
            let mut sampler = dist.sampler();
            for _ in 0..n as u64 {
                let idx = sampler.draw(rng);
                state.apply(idx);
            }
            Ok(state)
        }
        SnapshotMethod::PerBit => Ok(PerBitSampler::new(model, dist, t)?.sample(rng)),
    }
}

/// Precomputed per-bit marginals for repeated snapshot draws at a fixed
/// `(model, dist, t)`; amortizes the truncation scan over replicas.
#[derive(Debug, Clone)]
pub struct PerBitSampler {
    model: Model,
    /// For BF `(f_k, 1.0)` with `f_k = (1 - exp(-2 p_k t))/2`: active iff
    /// `u < f_k`. For DB `(e^-x, e^-x + x e^-x)`: idle / active / damaged
    /// by cumulative comparison, `x = p_k t`.
    thresholds: Vec<(f64, f64)>,
}

impl PerBitSampler {
    pub fn new(model: Model, dist: &BitDistribution, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!(
                "snapshot time must be positive, got {t}"
            )));
        }
        let mut cut = 1u32;
        while dist.tail(cut) * t >= PER_BIT_TV_TOL {
            cut += 1;
            if cut > 50_000_000 {
                return Err(Error::domain(
                    "per-bit truncation failed to close; tail decays too slowly for this t",
                ));
            }
        }
        let mut thresholds = Vec::with_capacity(cut as usize);
        for k in 1..=cut {
            let x = dist.pmf(k)? * t;
            match model {
                Model::Bf => {
                    let f = -0.5 * (-2.0 * x).exp_m1();
                    thresholds.push((f, 1.0));
                }
                Model::Db => {
                    let idle = (-x).exp();
                    thresholds.push((idle, idle + x * idle));
                }
            }
        }
        Ok(PerBitSampler { model, thresholds })
    }

    /// Number of bits explicitly sampled.
    pub fn truncation_index(&self) -> u32 {
        self.thresholds.len() as u32
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitState {
        let mut state = BitState::ground(self.model);
        for (i, &(a, b)) in self.thresholds.iter().enumerate() {
            let u: f64 = rng.random();
            let k = (i + 1) as u32;
            match self.model {
                Model::Bf => {
                    if u < a {
                        state.active.insert(k);
                    }
                }
                Model::Db => {
                    if u >= a {
                        if u < b {
                            state.active.insert(k);
                        } else {
                            state.damaged.insert(k);
                        }
                    }
                }
            }
        }
        state
    }
}

/// Total time the continuous-time chain spends in ground states over the
/// first `horizon` events: one Exp(1) holding time is accrued per visit
/// (the total event rate is exactly 1).
pub fn accumulated_ground_time<R: Rng + ?Sized>(
    dist: &BitDistribution,
    model: Model,
    horizon: u64,
    rng: &mut R,
) -> f64 {
    let mut state = BitState::ground(model);
    let mut sampler = dist.sampler();
    let mut total: f64 = rng.sample(Exp1);
    for _ in 0..horizon {
        let idx = sampler.draw(rng);
        state.apply(idx);
        if state.is_ground() {
            let hold: f64 = rng.sample(Exp1);
            total += hold;
        }
    }
    total
}

/// Deterministic RNG stream for one replica: all replicas share the master
/// seed and differ only in the ChaCha stream number, so results do not
/// depend on how replicas are scheduled across threads.
pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

/// Map replicas over a thread pool; the output order is by replica index,
/// independent of thread count.
pub fn run_replicas<T, F>(replicas: u64, master_seed: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(master_seed, i);
            job(i, &mut rng)
        })
        .collect()
}

/// Parallel map over replica indices for jobs that derive their own
/// streams; output order is by index.
pub fn run_indexed<T, F>(replicas: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..replicas).into_par_iter().map(job).collect()
}

/// Convenience: uniform in (0,1) from the replica stream.
pub fn draw_open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    open_unit(rng)
}
