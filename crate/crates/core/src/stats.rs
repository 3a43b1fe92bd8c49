//! Rate estimates with confidence intervals.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let (lo, hi) = wilson_from_rate(p, n_f, z);
    (if successes == 0 { 0.0 } else { lo }, if successes == n { 1.0 } else { hi })
}

/// Wilson interval from a rate and a (possibly non-integer, effective)
/// sample size.
pub fn wilson_from_rate(p: f64, n: f64, z: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Empirical rate with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub events: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Trials divided by the design effect; equals `trials` for
    /// independent events.
    pub effective_trials: f64,
}

impl RateEstimate {
    pub fn wilson(events: u64, trials: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(events, trials, Z95);
        let rate = if trials == 0 { 0.0 } else { events as f64 / trials as f64 };
        Self { events, trials, rate, ci_lo, ci_hi, effective_trials: trials as f64 }
    }

    /// Wilson lower bound at normal quantile `z`.
    pub fn lower_bound(&self, z: f64) -> f64 {
        if self.events == 0 {
            0.0
        } else {
            wilson_from_rate(self.rate, self.effective_trials, z).0
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }

    /// Binomial standard deviation of the rate at probability `p`.
    pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
        (p * (1.0 - p) / trials as f64).sqrt()
    }
}

/// Per-node failure rate pooled over trials whose node outcomes are
/// correlated.
///
/// `failure_sum` and `failure_sq_sum` are the sums over trials of the
/// failed-node count and its square, with `nodes` nodes per trial. The
/// interval is a Wilson interval on an
/// effective sample size shrunk by the observed design effect (between-trial
/// variance over the binomial variance), so within-trial dependence widens
/// the interval instead of being ignored.
pub fn pooled_rate(failure_sum: u64, failure_sq_sum: u64, trials: u64, nodes: u64) -> RateEstimate {
    let n = trials * nodes;
    if n == 0 {
        return RateEstimate { events: 0, trials: 0, rate: 0.0, ci_lo: 0.0, ci_hi: 1.0, effective_trials: 0.0 };
    }
    let p = failure_sum as f64 / n as f64;
    let mut deff = 1.0;
    if trials > 1 && p > 0.0 && p < 1.0 {
        let t = trials as f64;
        let mean = failure_sum as f64 / t;
        let var = (failure_sq_sum as f64 - t * mean * mean) / (t - 1.0);
        let binom = nodes as f64 * p * (1.0 - p);
        deff = (var / binom).max(1.0);
    }
    let effective_trials = n as f64 / deff;
    let (mut ci_lo, ci_hi) = wilson_from_rate(p, effective_trials, Z95);
    if failure_sum == 0 {
        ci_lo = 0.0;
    }
    RateEstimate { events: failure_sum, trials: n, rate: p, ci_lo, ci_hi, effective_trials }
}

/// Normal quantile for `m` simultaneous two-sided 95% intervals
/// (Bonferroni), so that all `m` cover together with probability >= 0.95.
pub fn family_z(m: usize) -> f64 {
    let tail = 0.025 / m.max(1) as f64;
    Normal::standard().inverse_cdf(1.0 - tail)
}
