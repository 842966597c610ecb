//! The sampling distribution on positive integers that drives both chain
//! models: probability weights `p_1 >= p_2 >= ...`, accurate tail sums
//! `Q_k`, the quantile function used for inverse-CDF sampling, and the
//! recurrence/transience classifiers for the built-in families.

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation target for the stretched-exponential normalizing constant:
/// summation stops once the integral-comparison tail bound drops below this
/// fraction of the partial sum.
const NORMALIZER_REL_TOL: f64 = 1e-14;

/// Supported distribution families.
///
/// `Geometric` uses the exactly normalized form `p_k = (1-p) p^(k-1)`;
/// `StretchedExp` is `p_k = C exp(-alpha k^gamma)` with `C` the exact
/// normalizer; `KappaCounterexample` is `p_k = C 2^(-kappa(k))` with
/// `kappa(k) = min{j^2 : j^2 > k}`; `FiniteTable` is an explicit pmf,
/// normalized at construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Geometric { p: f64 },
    StretchedExp { alpha: f64, gamma: f64 },
    KappaCounterexample,
    FiniteTable { pmf: Vec<f64> },
}

/// Recurrence verdict for a model/distribution pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Recurrent,
    Transient,
    Undetermined,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Recurrent => "Recurrent",
            Classification::Transient => "Transient",
            Classification::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
struct PrefixCache {
    /// `sums[i] = S_{i+1}`, the cumulative probability of indices `1..=i+1`.
    sums: Arc<Vec<f64>>,
    /// Set once further terms no longer change the partial sum at f64
    /// resolution (or the finite support is exhausted).
    saturated: bool,
}

/// A probability distribution on the positive integers.
///
/// Thread-safe: the prefix-sum and tail caches extend lazily under internal
/// locks, so a single instance can be shared across replica workers.
#[derive(Debug)]
pub struct BitDistribution {
    family: Family,
    /// Normalizing constant `C` with `p_k = C * weight(k)` (1 for the
    /// families that are normalized in closed form).
    norm: f64,
    prefix: RwLock<PrefixCache>,
    /// Accurate suffix sums for `StretchedExp` (index k holds `Q_k`);
    /// other families compute tails in closed form.
    tails: RwLock<Arc<Vec<f64>>>,
    /// Exact suffix sums for `FiniteTable`.
    table_suffix: Vec<f64>,
}

impl BitDistribution {
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) || !p.is_finite() {
            return Err(Error::domain(format!(
                "geometric ratio must lie in (0,1), got {p}"
            )));
        }
        Ok(Self::assemble(Family::Geometric { p }, 1.0, Vec::new()))
    }

    pub fn stretched_exp(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::domain(format!(
                "gamma must lie in (0,1), got {gamma}"
            )));
        }
        let total = stretched_total(alpha, gamma)?;
        Ok(Self::assemble(
            Family::StretchedExp { alpha, gamma },
            1.0 / total,
            Vec::new(),
        ))
    }

    pub fn kappa_counterexample() -> Self {
        let total = kappa_total();
        Self::assemble(Family::KappaCounterexample, 1.0 / total, Vec::new())
    }

    /// Build from an explicit weight table; weights are normalized exactly.
    /// The recurrence theory assumes non-increasing weights, but the
    /// constructor does not enforce that ordering.
    pub fn finite_table(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("pmf table must be non-empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain("pmf table entries must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::domain("pmf table must have positive total mass"));
        }
        let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // Exact suffix sums, accumulated from the small end.
        let mut suffix = vec![0.0; pmf.len() + 1];
        for k in (0..pmf.len()).rev() {
            suffix[k] = suffix[k + 1] + pmf[k];
        }
        Ok(Self::assemble(Family::FiniteTable { pmf }, 1.0, suffix))
    }

    fn assemble(family: Family, norm: f64, table_suffix: Vec<f64>) -> Self {
        BitDistribution {
            family,
            norm,
            prefix: RwLock::new(PrefixCache {
                sums: Arc::new(Vec::new()),
                saturated: false,
            }),
            tails: RwLock::new(Arc::new(Vec::new())),
            table_suffix,
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// The geometric ratio, when this is the geometric family.
    pub fn geometric_ratio(&self) -> Option<f64> {
        match self.family {
            Family::Geometric { p } => Some(p),
            _ => None,
        }
    }

    /// The normalizing constant `C` in `p_k = C * weight(k)`.
    pub(crate) fn normalizer(&self) -> f64 {
        self.norm
    }

    fn weight(&self, k: u32) -> f64 {
        debug_assert!(k >= 1);
        match &self.family {
            Family::Geometric { p } => (1.0 - p) * geometric_power(*p, k - 1),
            Family::StretchedExp { alpha, gamma } => (-alpha * (k as f64).powf(*gamma)).exp(),
            Family::KappaCounterexample => (-(kappa(k) as f64)).exp2(),
            Family::FiniteTable { pmf } => pmf.get(k as usize - 1).copied().unwrap_or(0.0),
        }
    }

    /// `p_k`. Errors on `k = 0` (indices are 1-based).
    pub fn pmf(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("pmf index must be >= 1"));
        }
        Ok(self.norm * self.weight(k))
    }

    /// `Q_k`, the probability of sampling an index strictly greater than
    /// `k`. Computed by family-specific accurate routes, never as `1 - S_k`,
    /// so very small tails keep full relative precision.
    pub fn tail(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match &self.family {
            Family::Geometric { p } => geometric_power(*p, k),
            Family::FiniteTable { .. } => self.table_suffix.get(k as usize).copied().unwrap_or(0.0),
            Family::KappaCounterexample => self.norm * kappa_tail_raw(k),
            Family::StretchedExp { .. } => {
                let tails = self.ensure_tails(k);
                tails[k as usize]
            }
        }
    }

    /// Smallest `k` with `S_k > u` (strict), extending the prefix cache as
    /// needed. Draws whose mass lies beyond f64 resolution of the partial
    /// sums clamp to the largest cached index.
    pub fn quantile(&self, u: f64) -> Result<u32> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!(
                "quantile argument must lie in (0,1), got {u}"
            )));
        }
        Ok(self.sampler().index_for(u))
    }

    /// A cheap cursor over the prefix-sum cache for repeated inverse-CDF
    /// lookups; it only touches the shared lock when the cache must grow.
    pub fn sampler(&self) -> IndexSampler<'_> {
        let (snap, saturated) = self.prefix_snapshot();
        IndexSampler {
            dist: self,
            snap,
            saturated,
        }
    }

    fn prefix_snapshot(&self) -> (Arc<Vec<f64>>, bool) {
        let guard = self.prefix.read().expect("prefix lock poisoned");
        (guard.sums.clone(), guard.saturated)
    }

    /// Grow the prefix cache (doubling) until it covers `u` or saturates.
    /// Returns the freshly published snapshot.
    fn extend_prefix(&self, u: f64) -> (Arc<Vec<f64>>, bool) {
        let mut guard = self.prefix.write().expect("prefix lock poisoned");
        while !guard.saturated && guard.sums.last().is_none_or(|&s| s <= u) {
            let old = &guard.sums;
            let target_len = (old.len() * 2).max(16);
            let mut sums = Vec::with_capacity(target_len);
            sums.extend_from_slice(old);
            let mut acc = sums.last().copied().unwrap_or(0.0);
            let mut saturated = false;
            while sums.len() < target_len {
                let k = sums.len() as u32 + 1;
                let next = acc + self.norm * self.weight(k);
                if next == acc {
                    // Exhausted support, or terms below f64 resolution.
                    saturated = true;
                    break;
                }
                sums.push(next);
                acc = next;
            }
            guard.sums = Arc::new(sums);
            guard.saturated = saturated;
        }
        (guard.sums.clone(), guard.saturated)
    }

    /// Tail cache for the stretched-exponential family, covering index `k`.
    fn ensure_tails(&self, k: u32) -> Arc<Vec<f64>> {
        {
            let guard = self.tails.read().expect("tails lock poisoned");
            if guard.len() > k as usize {
                return guard.clone();
            }
        }
        let (alpha, gamma) = match self.family {
            Family::StretchedExp { alpha, gamma } => (alpha, gamma),
            _ => unreachable!("tail cache is only used by StretchedExp"),
        };
        let mut guard = self.tails.write().expect("tails lock poisoned");
        if guard.len() > k as usize {
            return guard.clone();
        }
        let cover = ((k as usize + 1) * 2).max(64);
        // Pick a summation end J far enough that the dropped remainder is
        // below ~1e-16 of the smallest tail served by this cache.
        let ln_floor = (-alpha * (cover as f64).powf(gamma)).max(-745.0) - 37.0;
        let mut j = cover * 2 + 16;
        while stretched_tail_bound_ln(alpha, gamma, j as f64) > ln_floor {
            j *= 2;
            assert!(j < 1 << 40, "stretched-exp tail summation failed to close");
        }
        let w = |m: usize| (-alpha * (m as f64).powf(gamma)).exp();
        let mut tails = vec![0.0; cover + 1];
        let mut acc = 0.0;
        for m in ((cover + 1)..=j).rev() {
            acc += w(m);
        }
        tails[cover] = acc;
        for i in (0..cover).rev() {
            acc += w(i + 1);
            tails[i] = acc;
        }
        for t in tails.iter_mut() {
            *t *= self.norm;
        }
        *guard = Arc::new(tails);
        guard.clone()
    }

    /// Recurrence classification of the binary-flipping model.
    pub fn classify_bf(&self) -> Classification {
        match &self.family {
            // 2^k p_k stays bounded iff p <= 1/2; for p > 1/2 the weights
            // dominate a (2-eps)^(-k) sequence.
            Family::Geometric { p } => {
                if *p <= 0.5 {
                    Classification::Recurrent
                } else {
                    Classification::Transient
                }
            }
            // Super-geometric decay: 2^k p_k -> 0.
            Family::StretchedExp { .. } => Classification::Recurrent,
            // kappa(k) > k, so 2^k p_k <= C/2 is bounded.
            Family::KappaCounterexample => Classification::Recurrent,
            // Finite chains always return.
            Family::FiniteTable { .. } => Classification::Recurrent,
        }
    }

    /// Recurrence classification of the damaged-bits model.
    pub fn classify_db(&self) -> Classification {
        match &self.family {
            // limsup Q_{k+1}/Q_k = p < 1.
            Family::Geometric { .. } => Classification::Recurrent,
            Family::StretchedExp { gamma, .. } => {
                if *gamma < 0.5 {
                    Classification::Transient
                } else {
                    // The known sufficient conditions are silent on
                    // gamma in [1/2, 1); no guess.
                    Classification::Undetermined
                }
            }
            // The tail-ratio condition fails along k_i = i^2, and the decay
            // is too slow for the transience criterion.
            Family::KappaCounterexample => Classification::Undetermined,
            Family::FiniteTable { .. } => Classification::Recurrent,
        }
    }
}

/// Cursor for repeated quantile lookups against a cached snapshot of the
/// prefix sums; each worker takes its own via [`BitDistribution::sampler`].
#[derive(Debug)]
pub struct IndexSampler<'a> {
    dist: &'a BitDistribution,
    snap: Arc<Vec<f64>>,
    saturated: bool,
}

impl IndexSampler<'_> {
    /// Smallest `k` with `S_k > u`.
    #[inline]
    pub fn index_for(&mut self, u: f64) -> u32 {
        loop {
            let sums = self.snap.as_slice();
            // Draws concentrate on the first few indices (the weights are
            // non-increasing). Counting branchlessly over a short head
            // avoids mispredicted early exits; the rare deep draws fall
            // through to binary search.
            let head = &sums[..sums.len().min(16)];
            let mut idx = 0usize;
            for &s in head {
                idx += (s <= u) as usize;
            }
            if idx < head.len() {
                return (idx + 1) as u32;
            }
            idx += sums[head.len()..].partition_point(|&s| s <= u);
            if idx < sums.len() {
                return (idx + 1) as u32;
            }
            if self.saturated {
                // u falls beyond float-resolvable mass; clamp to the last
                // materialized index.
                return (self.snap.len() as u32).max(1);
            }
            let (snap, saturated) = self.dist.extend_prefix(u);
            self.snap = snap;
            self.saturated = saturated;
        }
    }

    /// Draw an index from a uniform variate in the open interval (0,1).
    #[inline]
    pub fn draw<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        self.index_for(open_unit(rng))
    }
}

/// Uniform f64 in the open interval (0,1).
#[inline]
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `p^k` for `p` in (0,1), exact multiply chains for small exponents and
/// the log route beyond i32 range.
fn geometric_power(p: f64, k: u32) -> f64 {
    if k <= i32::MAX as u32 {
        p.powi(k as i32)
    } else {
        (k as f64 * p.ln()).exp()
    }
}

/// `kappa(k) = min{j^2 : j^2 > k}`.
pub fn kappa(k: u32) -> u64 {
    let b = (k as f64).sqrt() as u64;
    // Guard against isqrt rounding at perfect squares.
    let b = if (b + 1) * (b + 1) <= k as u64 {
        b + 1
    } else {
        b
    };
    let b = if b * b > k as u64 { b - 1 } else { b };
    (b + 1) * (b + 1)
}

fn kappa_total() -> f64 {
    // sum over blocks: indices [b^2, (b+1)^2 - 1] share kappa = (b+1)^2.
    let mut total = 0.0;
    for b in 1u64.. {
        let term = (2 * b + 1) as f64 * (-(((b + 1) * (b + 1)) as f64)).exp2();
        if term == 0.0 {
            break;
        }
        total += term;
    }
    total
}

fn kappa_tail_raw(k: u32) -> f64 {
    let b = {
        let mut b = (k as f64).sqrt() as u64;
        if (b + 1) * (b + 1) <= k as u64 {
            b += 1;
        }
        if b * b > k as u64 {
            b -= 1;
        }
        b
    };
    let block_end = (b + 1) * (b + 1) - 1;
    let in_block = (block_end - k as u64) as f64 * (-(((b + 1) * (b + 1)) as f64)).exp2();
    let mut rest = 0.0;
    for b2 in (b + 1).. {
        let term = (2 * b2 + 1) as f64 * (-(((b2 + 1) * (b2 + 1)) as f64)).exp2();
        if term == 0.0 {
            break;
        }
        rest += term;
    }
    in_block + rest
}

/// ln of an upper bound on the integral remainder `∫_j^∞ exp(-a x^g) dx`,
/// via the substitution `v = a x^g` and `∫_T^∞ v^s e^-v dv <= T^s e^-T / (1 - s/T)`.
fn stretched_tail_bound_ln(alpha: f64, gamma: f64, j: f64) -> f64 {
    let t = alpha * j.powf(gamma);
    let s = 1.0 / gamma - 1.0;
    if t <= s + 1.0 {
        return f64::INFINITY;
    }
    -t + s * t.ln() - (1.0 / gamma) * alpha.ln() - gamma.ln() - (1.0 - s / t).ln()
}

/// Exact-to-1e-14 total mass of the unnormalized stretched-exp weights.
fn stretched_total(alpha: f64, gamma: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut k = 1usize;
    loop {
        acc += (-alpha * (k as f64).powf(gamma)).exp();
        if k < 8 || k.is_multiple_of(64) {
            let bound = stretched_tail_bound_ln(alpha, gamma, k as f64).exp();
            if bound < NORMALIZER_REL_TOL * acc {
                break;
            }
        }
        k += 1;
        if k >= 100_000_000 {
            return Err(Error::domain(format!(
                "stretched-exp weights with alpha = {alpha}, gamma = {gamma} decay too                  slowly to normalize at double precision"
            )));
        }
    }
    Ok(acc)
}

/// JSON wire form of a distribution, e.g. `{"family":"geometric","p":0.3}`.
///
/// Parsed strictly: unknown keys are rejected, and `build` checks that the
/// keys present are exactly the ones the named family needs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
}

impl DistSpec {
    pub fn geometric(p: f64) -> Self {
        DistSpec {
            family: "geometric".into(),
            p: Some(p),
            alpha: None,
            gamma: None,
            pmf: None,
        }
    }

    pub fn stretched_exp(alpha: f64, gamma: f64) -> Self {
        DistSpec {
            family: "stretched_exp".into(),
            p: None,
            alpha: Some(alpha),
            gamma: Some(gamma),
            pmf: None,
        }
    }

    pub fn kappa() -> Self {
        DistSpec {
            family: "kappa".into(),
            p: None,
            alpha: None,
            gamma: None,
            pmf: None,
        }
    }

    pub fn table(pmf: Vec<f64>) -> Self {
        DistSpec {
            family: "table".into(),
            p: None,
            alpha: None,
            gamma: None,
            pmf: Some(pmf),
        }
    }

    /// Validate and construct the distribution. `path` prefixes error
    /// locations (the CLI passes "dist").
    pub fn build_at(&self, path: &str) -> Result<BitDistribution> {
        let at = |field: &str| {
            if path.is_empty() {
                field.to_string()
            } else {
                format!("{path}.{field}")
            }
        };
        let reject = |field: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::config(
                    at(field),
                    format!("field does not apply to family \"{}\"", self.family),
                ))
            } else {
                Ok(())
            }
        };
        match self.family.as_str() {
            "geometric" => {
                reject("alpha", self.alpha.is_some())?;
                reject("gamma", self.gamma.is_some())?;
                reject("pmf", self.pmf.is_some())?;
                let p = self
                    .p
                    .ok_or_else(|| Error::config(at("p"), "geometric family requires p"))?;
                BitDistribution::geometric(p)
                    .map_err(|_| Error::config(at("p"), format!("must lie in (0,1), got {p}")))
            }
            "stretched_exp" => {
                reject("p", self.p.is_some())?;
                reject("pmf", self.pmf.is_some())?;
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::config(at("alpha"), "stretched_exp requires alpha"))?;
                let gamma = self
                    .gamma
                    .ok_or_else(|| Error::config(at("gamma"), "stretched_exp requires gamma"))?;
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::config(
                        at("alpha"),
                        format!("must be positive, got {alpha}"),
                    ));
                }
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::config(
                        at("gamma"),
                        format!("must lie in (0,1), got {gamma}"),
                    ));
                }
                BitDistribution::stretched_exp(alpha, gamma)
            }
            "kappa" => {
                reject("p", self.p.is_some())?;
                reject("alpha", self.alpha.is_some())?;
                reject("gamma", self.gamma.is_some())?;
                reject("pmf", self.pmf.is_some())?;
                Ok(BitDistribution::kappa_counterexample())
            }
            "table" => {
                reject("p", self.p.is_some())?;
                reject("alpha", self.alpha.is_some())?;
                reject("gamma", self.gamma.is_some())?;
                let pmf = self
                    .pmf
                    .as_ref()
                    .ok_or_else(|| Error::config(at("pmf"), "table family requires pmf"))?;
                BitDistribution::finite_table(pmf)
                    .map_err(|e| Error::config(at("pmf"), e.to_string()))
            }
            other => Err(Error::config(
                at("family"),
                format!(
                    "unknown family \"{other}\" (expected geometric | stretched_exp | kappa | table)"
                ),
            )),
        }
    }

    pub fn build(&self) -> Result<BitDistribution> {
        self.build_at("")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::stats;

    #[test]
    fn geometric_pmf_examples() {
        let d = BitDistribution::geometric(0.5).unwrap();
        assert_abs_diff_eq!(d.pmf(3).unwrap(), 0.125, epsilon = 0.0);
        assert!(d.pmf(0).is_err());
    }

    #[test]
    fn table_pmf_lookup() {
        let d = BitDistribution::finite_table(&[0.5, 0.3, 0.2]).unwrap();
        assert_abs_diff_eq!(d.pmf(2).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(d.pmf(4).unwrap(), 0.0);
    }

    #[test]
    fn kappa_weight_example() {
        // kappa(2) = 4, so p_2 = C * 2^-4 with C computed independently by
        // brute-force summation of the weights.
        let d = BitDistribution::kappa_counterexample();
        let brute: f64 = (1..=5000u32).map(|k| (-(kappa(k) as f64)).exp2()).sum();
        let c = 1.0 / brute;
        assert_abs_diff_eq!(d.pmf(2).unwrap(), c * 0.0625, epsilon = 1e-15);
        assert_eq!(kappa(1), 4);
        assert_eq!(kappa(3), 4);
        assert_eq!(kappa(4), 9);
        assert_eq!(kappa(8), 9);
        assert_eq!(kappa(9), 16);
    }

    #[test]
    fn tails_geometric_and_table() {
        let d = BitDistribution::geometric(0.5).unwrap();
        assert_abs_diff_eq!(d.tail(2), 0.25, epsilon = 0.0);
        assert_eq!(d.tail(0), 1.0);
        let t = BitDistribution::finite_table(&[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(t.tail(3), 0.0);
        assert_abs_diff_eq!(t.tail(1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn quantile_examples_and_strictness() {
        let d = BitDistribution::geometric(0.5).unwrap();
        assert_eq!(d.quantile(0.49).unwrap(), 1);
        // S_1 = 0.5 exactly; the strict inequality pushes u = 0.5 to k = 2.
        assert_eq!(d.quantile(0.5).unwrap(), 2);
        let t = BitDistribution::finite_table(&[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(t.quantile(0.85).unwrap(), 3);
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
    }

    #[test]
    fn quantile_clamps_beyond_float_mass() {
        let t = BitDistribution::finite_table(&[1.0]).unwrap();
        assert_eq!(t.quantile(0.999_999_999).unwrap(), 1);
    }

    #[test]
    fn prefix_and_tail_are_consistent() {
        for d in [
            BitDistribution::geometric(0.3).unwrap(),
            BitDistribution::geometric(0.9).unwrap(),
            BitDistribution::stretched_exp(1.0, 0.4).unwrap(),
            BitDistribution::kappa_counterexample(),
            BitDistribution::finite_table(&[0.4, 0.3, 0.2, 0.1]).unwrap(),
        ] {
            let mut s = 0.0;
            for k in 1..=200u32 {
                s += d.pmf(k).unwrap();
                assert!(
                    (s + d.tail(k) - 1.0).abs() < 1e-12,
                    "family {:?} k={k}: S+Q-1 = {:e}",
                    d.family(),
                    s + d.tail(k) - 1.0
                );
            }
        }
    }

    #[test]
    fn pmf_is_non_increasing() {
        for d in [
            BitDistribution::geometric(0.7).unwrap(),
            BitDistribution::stretched_exp(0.5, 0.3).unwrap(),
            BitDistribution::stretched_exp(2.0, 0.8).unwrap(),
            BitDistribution::kappa_counterexample(),
        ] {
            let mut prev = f64::INFINITY;
            for k in 1..=10_000u32 {
                let p = d.pmf(k).unwrap();
                assert!(p <= prev && p >= 0.0, "{:?} at k={k}", d.family());
                prev = p;
            }
        }
    }

    #[test]
    fn stretched_exp_tail_matches_brute_force() {
        let d = BitDistribution::stretched_exp(1.0, 0.5).unwrap();
        for k in [1u32, 5, 40, 300] {
            // Direct summation with a generous fixed cutoff.
            let c = d.pmf(1).unwrap() / (-1.0f64).exp();
            let brute: f64 = (k + 1..k + 40_000)
                .map(|j| c * (-(j as f64).sqrt()).exp())
                .sum();
            let rel = (d.tail(k) - brute).abs() / brute;
            assert!(rel < 1e-10, "k={k}: rel err {rel:e}");
        }
    }

    #[test]
    fn kappa_tail_ratio_approaches_one_along_squares() {
        // The tail ratio at k_i = i^2 exceeds 1 - 1/(2i+1).
        let d = BitDistribution::kappa_counterexample();
        for i in 1..=30u32 {
            let k = i * i;
            let ratio = d.tail(k) / d.tail(k - 1);
            let bound = 1.0 - 1.0 / (2.0 * i as f64 + 1.0);
            // For large i the true margin over the bound is ~2^-(2i+3),
            // below f64 resolution, so allow rounding slack.
            assert!(
                ratio >= bound - 1e-12,
                "i={i}: ratio {ratio} below bound {bound}"
            );
        }
    }

    #[test]
    fn quantile_sampling_matches_pmf() {
        // Chi-square goodness of fit on the first 20 indices plus overflow
        // cell, 1e6 draws.
        let d = BitDistribution::geometric(0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut sampler = d.sampler();
        let n = 1_000_000usize;
        let mut counts = [0u64; 21];
        for _ in 0..n {
            let k = sampler.draw(&mut rng);
            let cell = (k as usize - 1).min(20);
            counts[cell] += 1;
        }
        let mut expected = [0.0f64; 21];
        for k in 1..=20u32 {
            expected[k as usize - 1] = d.pmf(k).unwrap() * n as f64;
        }
        expected[20] = d.tail(20) * n as f64;
        let res = stats::chi_square_gof(&counts, &expected);
        assert!(res.p_value > 0.001, "chi2 p = {}", res.p_value);
    }

    #[test]
    fn classify_bf_table() {
        use Classification::*;
        assert_eq!(
            BitDistribution::geometric(0.4).unwrap().classify_bf(),
            Recurrent
        );
        assert_eq!(
            BitDistribution::geometric(0.5).unwrap().classify_bf(),
            Recurrent
        );
        assert_eq!(
            BitDistribution::geometric(0.6).unwrap().classify_bf(),
            Transient
        );
        assert_eq!(
            BitDistribution::stretched_exp(1.0, 0.3)
                .unwrap()
                .classify_bf(),
            Recurrent
        );
        assert_eq!(
            BitDistribution::kappa_counterexample().classify_bf(),
            Recurrent
        );
        assert_eq!(
            BitDistribution::finite_table(&[0.9, 0.1])
                .unwrap()
                .classify_bf(),
            Recurrent
        );
    }

    #[test]
    fn classify_db_table() {
        use Classification::*;
        assert_eq!(
            BitDistribution::geometric(0.3).unwrap().classify_db(),
            Recurrent
        );
        assert_eq!(
            BitDistribution::stretched_exp(1.0, 0.4)
                .unwrap()
                .classify_db(),
            Transient
        );
        assert_eq!(
            BitDistribution::stretched_exp(1.0, 0.7)
                .unwrap()
                .classify_db(),
            Undetermined
        );
        assert_eq!(
            BitDistribution::kappa_counterexample().classify_db(),
            Undetermined
        );
        assert_eq!(
            BitDistribution::finite_table(&[0.5, 0.5])
                .unwrap()
                .classify_db(),
            Recurrent
        );
    }

    #[test]
    fn dist_spec_round_trip_and_errors() {
        let spec: DistSpec = serde_json::from_str(r#"{"family":"geometric","p":0.3}"#).unwrap();
        let d = spec.build().unwrap();
        assert_eq!(d.geometric_ratio(), Some(0.3));

        let bad: DistSpec = serde_json::from_str(r#"{"family":"geometric","p":1.5}"#).unwrap();
        let err = bad.build_at("dist").unwrap_err();
        assert!(err.to_string().contains("dist.p"), "{err}");

        let unknown = serde_json::from_str::<DistSpec>(r#"{"family":"geometric","q":0.3}"#);
        assert!(unknown.is_err());

        let cross: DistSpec = serde_json::from_str(r#"{"family":"kappa","p":0.3}"#).unwrap();
        assert!(cross
            .build_at("dist")
            .unwrap_err()
            .to_string()
            .contains("dist.p"));
    }

    #[test]
    fn concurrent_quantile_extension_is_consistent() {
        use rayon::prelude::*;
        let d = BitDistribution::geometric(0.97).unwrap();
        let crossings: Vec<u32> = (0..64u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(i);
                let mut sampler = d.sampler();
                (0..10_000).map(|_| sampler.draw(&mut rng)).max().unwrap()
            })
            .collect();
        // Same draws re-done serially must give identical answers.
        for (i, &expect) in crossings.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            let mut sampler = d.sampler();
            let got = (0..10_000).map(|_| sampler.draw(&mut rng)).max().unwrap();
            assert_eq!(got, expect);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn quantile_is_monotone(p in 0.05f64..0.95, u1 in 1e-9f64..1.0, u2 in 1e-9f64..1.0) {
            prop_assume!(u1 < 1.0 && u2 < 1.0);
            let d = BitDistribution::geometric(p).unwrap();
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            prop_assert!(d.quantile(lo).unwrap() <= d.quantile(hi).unwrap());
        }

        #[test]
        fn quantile_inverts_prefix(p in 0.05f64..0.95, u in 1e-9f64..0.999_999) {
            let d = BitDistribution::geometric(p).unwrap();
            let k = d.quantile(u).unwrap();
            // S_{k-1} <= u < S_k by definition of the generalized inverse.
            let s_km1: f64 = (1..k).map(|j| d.pmf(j).unwrap()).sum();
            let s_k = s_km1 + d.pmf(k).unwrap();
            prop_assert!(s_km1 <= u + 1e-12);
            prop_assert!(s_k > u - 1e-12);
        }
    }
}
