//! Estimators, confidence intervals and goodness-of-fit helpers shared by the
//! experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Monte-Carlo estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub value: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: u64,
    pub seed: u64,
}

impl EstimateWithCI {
    /// Proportion from `successes` out of `trials` independent Bernoulli draws,
    /// with a Wilson interval.
    pub fn from_bernoulli(successes: u64, trials: u64, reps: u64, seed: u64) -> Self {
        if trials == 0 {
            return Self { value: f64::NAN, std_error: f64::NAN, ci_low: 0.0, ci_high: 1.0, reps, seed };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let (lo, hi) = wilson(p, n, Z95);
        Self { value: p, std_error: (p * (1.0 - p) / n).sqrt(), ci_low: lo, ci_high: hi, reps, seed }
    }

    /// Pooled proportion over replications, each contributing `(successes,
    /// trials)`. Outcomes inside one replication may be correlated, so the
    /// standard error comes from the between-replication spread (ratio
    /// estimator) and the Wilson interval uses the matching effective sample
    /// size.
    pub fn from_clusters(clusters: &[(u64, u64)], seed: u64) -> Self {
        let reps = clusters.len() as u64;
        let k: u64 = clusters.iter().map(|c| c.0).sum();
        let n: u64 = clusters.iter().map(|c| c.1).sum();
        if n == 0 {
            return Self { value: f64::NAN, std_error: f64::NAN, ci_low: 0.0, ci_high: 1.0, reps, seed };
        }
        let p = k as f64 / n as f64;
        let nf = n as f64;
        let se = if clusters.len() > 1 {
            let r = clusters.len() as f64;
            let ss: f64 = clusters
                .iter()
                .map(|&(ki, ni)| (ki as f64 - p * ni as f64).powi(2))
                .sum();
            (r / (r - 1.0) * ss).sqrt() / nf
        } else {
            (p * (1.0 - p) / nf).sqrt()
        };
        let n_eff = if se > 0.0 { (p * (1.0 - p) / (se * se)).max(1.0) } else { nf };
        let (lo, hi) = wilson(p, n_eff, Z95);
        Self { value: p, std_error: se, ci_low: lo, ci_high: hi, reps, seed }
    }

    /// Sample mean with a normal-theory interval.
    pub fn from_mean(samples: &[f64], seed: u64) -> Self {
        let (mean, var) = mean_var(samples);
        let se = (var / samples.len() as f64).sqrt();
        Self {
            value: mean,
            std_error: se,
            ci_low: mean - Z95 * se,
            ci_high: mean + Z95 * se,
            reps: samples.len() as u64,
            seed,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Whether `target` is within `k` standard errors of the estimate.
    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Wilson score interval for a proportion `p` observed on `n` trials.
pub fn wilson(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Smallest trial count whose Wilson half-width at proportion `p` does not
/// exceed `half_width`.
pub fn wilson_trials_for(p: f64, half_width: f64, z: f64) -> u64 {
    let width = |n: f64| {
        let (lo, hi) = wilson(p, n, z);
        0.5 * (hi - lo)
    };
    let mut hi = 1.0f64;
    while width(hi) > half_width {
        hi *= 2.0;
        if hi > 1e15 {
            return u64::MAX;
        }
    }
    let mut lo = (hi / 2.0).max(1.0);
    if width(lo) <= half_width {
        return lo as u64;
    }
    while hi - lo > 1.0 {
        let mid = (0.5 * (lo + hi)).floor();
        if width(mid) <= half_width {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi as u64
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub n: usize,
    pub p_value: f64,
}

impl KsOutcome {
    /// Critical value of the statistic at significance `alpha`.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        ks_critical_value(self.n, alpha)
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.statistic > self.critical_value(alpha)
    }
}

pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    KsOutcome { statistic: d, n, p_value: kolmogorov_sf(effective_sqrt_n(nf) * d) }
}

fn effective_sqrt_n(n: f64) -> f64 {
    let s = n.sqrt();
    s + 0.12 + 0.11 / s
}

/// Asymptotic critical value with the Stephens small-sample correction.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / effective_sqrt_n(n as f64)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Upper-tail chi-square probability.
pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).map(|c| c.sf(statistic)).unwrap_or(f64::NAN)
}

pub fn chi_square_cdf(statistic: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).map(|c| c.cdf(statistic)).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_contains_estimate_and_shrinks() {
        let (lo, hi) = wilson(0.2, 100.0, Z95);
        assert!(lo < 0.2 && 0.2 < hi);
        let (lo2, hi2) = wilson(0.2, 10_000.0, Z95);
        assert!(hi2 - lo2 < hi - lo);
        let (lo0, _) = wilson(0.0, 50.0, Z95);
        assert_eq!(lo0, 0.0);
    }

    #[test]
    fn wilson_inversion() {
        let n = wilson_trials_for(0.2056, 0.005, Z95);
        let (lo, hi) = wilson(0.2056, n as f64, Z95);
        assert!(0.5 * (hi - lo) <= 0.005);
        let (lo, hi) = wilson(0.2056, (n - 1) as f64, Z95);
        assert!(0.5 * (hi - lo) > 0.005);
        // normal approximation p(1-p)(z/h)^2 ~ 25 096
        assert!((24_000..26_500).contains(&n), "{n}");
    }

    #[test]
    fn cluster_estimate_reduces_to_binomial_for_equal_iid_clusters() {
        let clusters = vec![(20, 100); 10];
        let e = EstimateWithCI::from_clusters(&clusters, 0);
        assert_abs_diff_eq!(e.value, 0.2);
        assert_eq!(e.std_error, 0.0);
        assert!(e.ci_low <= 0.2 && e.ci_high >= 0.2);
    }

    #[test]
    fn kolmogorov_tail_matches_tabulated_points() {
        // K(1.36) ~ 0.95, K(1.63) ~ 0.99
        assert_abs_diff_eq!(kolmogorov_sf(1.358), 0.05, epsilon = 1e-3);
        assert_abs_diff_eq!(kolmogorov_sf(1.628), 0.01, epsilon = 1e-3);
    }

    #[test]
    fn ks_on_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let out = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(out.statistic <= 0.5 / n as f64 + 1e-12);
        assert!(!out.rejects(0.01));
    }
}
