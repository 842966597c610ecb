//! Monte Carlo post-processing: return-time statistics with censoring,
//! fractional moments with a subsample-stability diagnostic, Hill tail-index
//! estimation, conditional moment growth in the initial top bit, and the
//! CLT check for the standardized number of active bits.
//!
//! All estimators are deterministic functions of their inputs; the sampling
//! randomness lives in `engine`.

use serde::Serialize;

use crate::analytics::{expected_active, moment_bounds, variance_active};
use crate::distributions::BitDistribution;
use crate::engine::{run_replicas, run_return_time, BitState, Model, PerBitSampler, ReturnOutcome};
use crate::error::{Error, Result};
use crate::stats;

/// Hill estimates above this value are flagged as not heavy-tailed.
pub const NON_HEAVY_CUTOFF: f64 = 3.0;

/// Minimum uncensored sample size for the tail-index estimator.
pub const MIN_TAIL_SAMPLES: usize = 10_000;

/// Relative drift between the n/10-subsample and full-sample means above
/// which an estimate is flagged unstable.
const STABILITY_DRIFT: f64 = 0.2;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FractionalMoment {
    pub r: f64,
    pub estimate: f64,
    /// |estimate(n/10) - estimate(n)| / estimate(n); large drift means the
    /// moment has not stabilized at this sample size.
    pub subsample_drift: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailIndex {
    /// Hill estimate of the survival exponent theta in P(tau > x) ~ x^-theta.
    pub theta: f64,
    /// 95% confidence interval from the asymptotic normality of the Hill
    /// estimator.
    pub ci: (f64, f64),
    pub k_used: usize,
    /// Secondary estimate: least-squares slope of the empirical log-survival
    /// over the same top order statistics.
    pub theta_ls: f64,
    pub heavy: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorSummary {
    pub n_samples: usize,
    pub censored_fraction: f64,
    pub mean: f64,
    pub mean_unstable: bool,
    pub fractional_moments: Vec<FractionalMoment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_index: Option<TailIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skewness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_kurtosis: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

fn uncensored_taus(samples: &[ReturnOutcome]) -> Vec<f64> {
    samples
        .iter()
        .filter_map(|o| o.steps().map(|n| n as f64))
        .collect()
}

/// Empirical mean, fractional moments over the uncensored runs, and the
/// censoring fraction. Fractional moments carry the n/10-vs-n stability
/// drift; with heavy tails a point estimate alone proves nothing. If every
/// run was censored the mean and moments come back NaN.
pub fn return_stats(samples: &[ReturnOutcome], r_grid: &[f64]) -> Result<EstimatorSummary> {
    if samples.is_empty() {
        return Err(Error::domain("return_stats needs at least one sample"));
    }
    for &r in r_grid {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::domain(format!(
                "fractional orders must lie in (0,1), got {r}"
            )));
        }
    }
    let taus = uncensored_taus(samples);
    let censored_fraction = 1.0 - taus.len() as f64 / samples.len() as f64;
    let tenth = &taus[..taus.len() / 10];

    let mean = stats::mean(&taus);
    let mean_unstable = if tenth.len() >= 10 {
        (stats::mean(tenth) - mean).abs() > STABILITY_DRIFT * mean.abs()
    } else {
        false
    };

    let fractional_moments = r_grid
        .iter()
        .map(|&r| {
            let full = moment_of(&taus, r);
            let sub = if tenth.len() >= 10 {
                moment_of(tenth, r)
            } else {
                full
            };
            FractionalMoment {
                r,
                estimate: full,
                subsample_drift: ((sub - full) / full).abs(),
            }
        })
        .collect();

    Ok(EstimatorSummary {
        n_samples: samples.len(),
        censored_fraction,
        mean,
        mean_unstable,
        fractional_moments,
        tail_index: None,
        ks_statistic: None,
        skewness: None,
        excess_kurtosis: None,
        variance: None,
    })
}

fn moment_of(taus: &[f64], r: f64) -> f64 {
    if taus.is_empty() {
        return f64::NAN;
    }
    taus.iter().map(|t| t.powf(r)).sum::<f64>() / taus.len() as f64
}

/// Hill estimator on the largest `k_fraction * n` order statistics of the
/// uncensored return times.
pub fn tail_index(samples: &[ReturnOutcome], k_fraction: f64) -> Result<TailIndex> {
    hill_tail_index(&uncensored_taus(samples), k_fraction)
}

/// Hill estimator over raw positive values.
pub fn hill_tail_index(values: &[f64], k_fraction: f64) -> Result<TailIndex> {
    if !(k_fraction > 0.0 && k_fraction <= 0.2) {
        return Err(Error::domain(format!(
            "k_fraction must lie in (0, 0.2], got {k_fraction}"
        )));
    }
    let n = values.len();
    if n < MIN_TAIL_SAMPLES {
        return Err(Error::domain(format!(
            "tail index needs >= {MIN_TAIL_SAMPLES} uncensored samples, got {n}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("NaN in tail sample"));
    let k = ((k_fraction * n as f64) as usize).clamp(10, n - 1);
    let cutoff = sorted[k];
    if !(cutoff > 0.0) {
        return Err(Error::domain("tail order statistics must be positive"));
    }
    let gamma: f64 = sorted[..k].iter().map(|x| (x / cutoff).ln()).sum::<f64>() / k as f64;
    if !(gamma > 0.0) {
        return Err(Error::domain(
            "degenerate tail: all top order statistics equal",
        ));
    }
    let theta = 1.0 / gamma;
    let z = 1.96 / (k as f64).sqrt();
    let ci = (1.0 / (gamma * (1.0 + z)), 1.0 / (gamma * (1.0 - z)));

    // Cross-check: least-squares fit of log survival vs log value.
    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for (i, &x) in sorted[..k].iter().enumerate() {
        if x > 0.0 {
            xs.push(x.ln());
            ys.push(((i + 1) as f64 / n as f64).ln());
        }
    }
    let (slope, _) = stats::linear_fit(&xs, &ys);

    Ok(TailIndex {
        theta,
        ci,
        k_used: k,
        theta_ls: -slope,
        heavy: theta < NON_HEAVY_CUTOFF,
    })
}

/// Fit of `log E[tau^r | M0 = m]` against `m`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    /// Per-m moment estimates (m, E[tau^r | M0 = m]).
    pub points: Vec<(u32, f64)>,
    /// Least-squares slope of the log estimates in m.
    pub slope: f64,
    /// The theoretical growth-rate ceiling log(1/(2p)).
    pub bound: f64,
    pub replicas_per_m: u64,
    pub censored_fraction: f64,
}

/// Estimate `E[tau^r | M0 = m]` for the BF chain over a grid of initial top
/// bits `m` (a single active bit at index m; m = 0 is the ground start) and
/// fit the exponential growth rate. Requires the geometric family with
/// ratio below 1/2 and a fractional order in the finite-moment range.
pub fn conditional_moment_growth(
    dist: &BitDistribution,
    r: f64,
    m_grid: &[u32],
    replicas: u64,
    horizon: u64,
    master_seed: u64,
) -> Result<GrowthFit> {
    let p = dist.geometric_ratio().ok_or_else(|| {
        Error::domain("conditional moment growth is defined for the geometric family")
    })?;
    let bounds = moment_bounds(p)?;
    if !(r > 0.0 && r < bounds.r_lower) {
        return Err(Error::domain(format!(
            "order r = {r} is outside the guaranteed-finite range (0, {})",
            bounds.r_lower
        )));
    }
    if m_grid.len() < 2 {
        return Err(Error::domain("need at least two m values to fit a slope"));
    }
    let mut points = Vec::with_capacity(m_grid.len());
    let mut censored = 0u64;
    for (i, &m) in m_grid.iter().enumerate() {
        // One stream per (m, replica) pair.
        let stream_base = (i as u64) << 40;
        let samples = crate::engine::run_indexed(replicas, |rep| {
            let mut rng = crate::engine::replica_rng(master_seed, stream_base | rep);
            let initial = if m == 0 {
                BitState::ground(Model::Bf)
            } else {
                BitState::with_active(Model::Bf, &[m]).expect("m >= 1")
            };
            run_return_time(dist, initial, horizon, &mut rng)
        });
        censored += samples.iter().filter(|o| o.is_censored()).count() as u64;
        let taus = uncensored_taus(&samples);
        if taus.is_empty() {
            return Err(Error::domain(format!(
                "all runs censored at m = {m}; raise the horizon"
            )));
        }
        points.push((m, moment_of(&taus, r)));
    }
    let xs: Vec<f64> = points.iter().map(|(m, _)| *m as f64).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let (slope, _) = stats::linear_fit(&xs, &ys);
    Ok(GrowthFit {
        points,
        slope,
        bound: (1.0 / (2.0 * p)).ln(),
        replicas_per_m: replicas,
        censored_fraction: censored as f64 / (replicas * m_grid.len() as u64) as f64,
    })
}

/// Standardize Monte Carlo replicas of the active-bit count at time `t`
/// with the *analytic* mean and variance series, and test the result
/// against a standard normal. Using the analytic moments (never the sample
/// ones) makes this a joint check of the series and the limit law.
///
/// The KS reference CDF is evaluated with a half-step continuity
/// correction: the counts are integers, and without the correction the KS
/// distance of a lattice variable to a continuous normal is bounded below
/// by roughly `1/(2 sigma sqrt(2 pi))` no matter how close the law is to
/// its limit.
pub fn clt_check(
    dist: &BitDistribution,
    model: Model,
    t: f64,
    replicas: u64,
    master_seed: u64,
) -> Result<EstimatorSummary> {
    if replicas < 1_000 {
        return Err(Error::domain(format!(
            "clt_check needs at least 1000 replicas, got {replicas}"
        )));
    }
    let mean_report = expected_active(dist, model, t)?;
    let var_report = variance_active(dist, model, t)?;
    if var_report.value < 1e-6 {
        return Err(Error::domain(format!(
            "analytic variance {} is degenerate at t = {t}",
            var_report.value
        )));
    }
    let sampler = PerBitSampler::new(model, dist, t)?;
    let mu = mean_report.value;
    let sigma = var_report.value.sqrt();
    let counts: Vec<u64> = run_replicas(replicas, master_seed, |_, rng| {
        sampler.sample(rng).active_count() as u64
    });
    let zs: Vec<f64> = counts.iter().map(|&c| (c as f64 - mu) / sigma).collect();

    let mut sorted = counts;
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let f_emp = j as f64 / n;
        let f_ref = stats::standard_normal_cdf((v as f64 + 0.5 - mu) / sigma);
        ks = ks.max((f_emp - f_ref).abs());
        i = j;
    }

    Ok(EstimatorSummary {
        n_samples: zs.len(),
        censored_fraction: 0.0,
        mean: stats::mean(&zs),
        mean_unstable: false,
        fractional_moments: Vec::new(),
        tail_index: None,
        ks_statistic: Some(ks),
        skewness: Some(stats::skewness(&zs)),
        excess_kurtosis: Some(stats::excess_kurtosis(&zs)),
        variance: Some(stats::sample_variance(&zs)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{replica_rng, Tau};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn constant_outcomes(tau: u64, n: usize) -> Vec<ReturnOutcome> {
        vec![
            ReturnOutcome {
                tau: Tau::Returned(tau),
                m0: 0,
                peak_m: 1,
            };
            n
        ]
    }

    #[test]
    fn return_stats_constant_samples() {
        let samples = constant_outcomes(2, 500);
        let s = return_stats(&samples, &[0.25, 0.5]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.censored_fraction, 0.0);
        assert!(!s.mean_unstable);
        assert_abs_diff_eq!(
            s.fractional_moments[0].estimate,
            2f64.powf(0.25),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            s.fractional_moments[1].estimate,
            2f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(s.fractional_moments[0].subsample_drift < 1e-12);
    }

    #[test]
    fn return_stats_rejects_bad_input() {
        assert!(return_stats(&[], &[]).is_err());
        let samples = constant_outcomes(2, 200);
        assert!(return_stats(&samples, &[1.5]).is_err());
    }

    #[test]
    fn return_stats_counts_censoring() {
        let mut samples = constant_outcomes(4, 300);
        for o in samples.iter_mut().take(100) {
            o.tau = Tau::Censored(1000);
        }
        let s = return_stats(&samples, &[]).unwrap();
        assert_abs_diff_eq!(s.censored_fraction, 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(s.mean, 4.0);
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let mut rng = replica_rng(1, 0);
        let theta = 0.5;
        let values: Vec<f64> = (0..100_000)
            .map(|_| {
                let u: f64 = rng.random::<f64>().max(1e-300);
                u.powf(-1.0 / theta)
            })
            .collect();
        let est = hill_tail_index(&values, 0.05).unwrap();
        assert!(est.theta > 0.45 && est.theta < 0.55, "theta {}", est.theta);
        assert!(est.heavy);
        assert!(est.ci.0 < theta && theta < est.ci.1);
        assert!((est.theta_ls - theta).abs() < 0.1, "ls {}", est.theta_ls);
    }

    #[test]
    fn hill_flags_exponential_as_non_heavy() {
        let mut rng = replica_rng(2, 0);
        let values: Vec<f64> = (0..100_000)
            .map(|_| -rng.random::<f64>().max(1e-300).ln())
            .collect();
        let est = hill_tail_index(&values, 0.01).unwrap();
        assert!(est.theta > NON_HEAVY_CUTOFF, "theta {}", est.theta);
        assert!(!est.heavy);
    }

    #[test]
    fn hill_ci_covers_truth_in_most_repetitions() {
        let theta = 0.7;
        let mut covered = 0;
        for rep in 0..100u64 {
            let mut rng = replica_rng(3, rep);
            let values: Vec<f64> = (0..20_000)
                .map(|_| rng.random::<f64>().max(1e-300).powf(-1.0 / theta))
                .collect();
            let est = hill_tail_index(&values, 0.05).unwrap();
            if est.ci.0 <= theta && theta <= est.ci.1 {
                covered += 1;
            }
        }
        assert!(covered >= 90, "coverage {covered}/100");
    }

    #[test]
    fn hill_rejects_small_or_bad_samples() {
        assert!(hill_tail_index(&[1.0; 100], 0.05).is_err());
        let values = vec![1.0; 20_000];
        assert!(hill_tail_index(&values, 0.5).is_err());
        // All-equal values have no tail spread.
        assert!(hill_tail_index(&values, 0.05).is_err());
    }

    #[test]
    fn growth_fit_stays_under_bound() {
        let dist = BitDistribution::geometric(0.4).unwrap();
        let fit = conditional_moment_growth(&dist, 0.1, &[2, 3, 4, 5], 3_000, 100_000, 11).unwrap();
        assert!(
            fit.slope <= fit.bound + 0.2,
            "slope {} bound {}",
            fit.slope,
            fit.bound
        );
        assert_abs_diff_eq!(fit.bound, (1.0f64 / 0.8).ln(), epsilon = 1e-15);
    }

    #[test]
    fn growth_ground_start_matches_unconditional() {
        let dist = BitDistribution::geometric(0.3).unwrap();
        let fit = conditional_moment_growth(&dist, 0.2, &[0, 1], 4_000, 100_000, 12).unwrap();
        let samples = run_replicas(4_000, 913, |_, rng| {
            run_return_time(&dist, BitState::ground(Model::Bf), 100_000, rng)
        });
        let unconditional = return_stats(&samples, &[0.2]).unwrap().fractional_moments[0].estimate;
        let (m0, est0) = fit.points[0];
        assert_eq!(m0, 0);
        assert!(
            (est0 - unconditional).abs() < 0.15 * unconditional,
            "{est0} vs {unconditional}"
        );
    }

    #[test]
    fn growth_rejects_wrong_family_or_order() {
        let se = BitDistribution::stretched_exp(1.0, 0.4).unwrap();
        assert!(conditional_moment_growth(&se, 0.1, &[1, 2], 100, 1000, 1).is_err());
        let dist = BitDistribution::geometric(0.25).unwrap();
        // r above r_lower = 0.5 is not guaranteed finite.
        assert!(conditional_moment_growth(&dist, 0.7, &[1, 2], 100, 1000, 1).is_err());
    }

    #[test]
    fn clt_check_smoke_and_degenerate_error() {
        let dist = BitDistribution::geometric(0.3).unwrap();
        let s = clt_check(&dist, Model::Bf, 1e3, 2_000, 21).unwrap();
        assert!(s.mean.abs() < 0.2, "mean {}", s.mean);
        assert!(s.ks_statistic.unwrap() < 0.15);
        assert!(clt_check(&dist, Model::Bf, 1e-9, 2_000, 21).is_err());
        assert!(clt_check(&dist, Model::Bf, 1e3, 10, 21).is_err());
    }
}
