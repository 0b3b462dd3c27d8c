//! Composite Nakagami-m / log-normal channel power gains and association
//! weights.
//!
//! A gain is drawn as `H = X · G` with `X` log-normal(μ, σ²) and
//! `G ~ Gamma(m, 1/m)`, i.e. `H | X ~ Gamma(m, X/m)`. Marginalising over `X`
//! gives the gamma-log-normal mixture density evaluated by [`gain_pdf`].

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Nakagami shape.
    pub m: f64,
    /// Log-normal location, natural-log units.
    pub mu: f64,
    /// Log-normal variance, natural-log units squared.
    pub sigma2: f64,
    /// Path-loss exponent.
    pub alpha: f64,
}

impl ChannelParams {
    pub fn new(m: f64, mu: f64, sigma2: f64, alpha: f64) -> Result<Self> {
        let cp = Self { m, mu, sigma2, alpha };
        cp.validate()?;
        Ok(cp)
    }

    /// Rayleigh fading, no shadowing.
    pub fn rayleigh(alpha: f64) -> Self {
        Self { m: 1.0, mu: 0.0, sigma2: 0.0, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::invalid("m", format!("Nakagami shape must be > 0, got {}", self.m)));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::invalid("sigma2", format!("must be >= 0, got {}", self.sigma2)));
        }
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(Error::invalid("alpha", format!("path-loss exponent must be > 2, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// E[H] = exp(μ + σ²/2).
    pub fn mean_gain(&self) -> f64 {
        (self.mu + 0.5 * self.sigma2).exp()
    }
}

/// How shadowing quoted in dB maps to natural-log units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DbConvention {
    /// The dB figure is the standard deviation σ_dB.
    SigmaInDb,
    /// The dB figure is the variance σ²_dB.
    Sigma2InDb,
}

impl DbConvention {
    pub fn tag(&self) -> &'static str {
        match self {
            DbConvention::SigmaInDb => "sigma-in-dB",
            DbConvention::Sigma2InDb => "sigma2-in-dB",
        }
    }

    /// Natural-log variance for a dB figure read under this convention.
    pub fn to_sigma2_ln(&self, db: f64) -> f64 {
        let k = std::f64::consts::LN_10 / 10.0;
        match self {
            DbConvention::SigmaInDb => (db * k).powi(2),
            DbConvention::Sigma2InDb => db * k * k,
        }
    }
}

/// Law of the association weight W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightLaw {
    /// W = 1/H on each link: association by distance only.
    Nearest,
    /// W = 1: strongest received power.
    Unit,
    /// W log-normal, drawn once per base station.
    LogNormal { mu: f64, sigma2: f64 },
}

impl WeightLaw {
    pub fn validate(&self) -> Result<()> {
        if let WeightLaw::LogNormal { mu, sigma2 } = *self {
            if !mu.is_finite() || !(sigma2.is_finite() && sigma2 >= 0.0) {
                return Err(Error::invalid("law", format!("bad log-normal weight law ({mu}, {sigma2})")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            WeightLaw::Nearest => "nearest".into(),
            WeightLaw::Unit => "unit".into(),
            WeightLaw::LogNormal { mu, sigma2 } => format!("lognormal:{mu},{sigma2}"),
        }
    }

    /// Natural log of a per-base-station weight. Meaningless for `Nearest`,
    /// which cancels the link gain instead.
    pub fn sample_ln_weight<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightLaw::Nearest | WeightLaw::Unit => 0.0,
            WeightLaw::LogNormal { mu, sigma2 } => {
                if sigma2 == 0.0 {
                    mu
                } else {
                    Normal::new(mu, sigma2.sqrt()).expect("validated").sample(rng)
                }
            }
        }
    }
}

impl std::str::FromStr for WeightLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "nearest" => Ok(WeightLaw::Nearest),
            "unit" => Ok(WeightLaw::Unit),
            _ => {
                let rest = s
                    .strip_prefix("lognormal:")
                    .ok_or_else(|| Error::invalid("law", format!("unknown law `{s}`")))?;
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::invalid("law", "expected lognormal:MU,SIG2"))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid("law", format!("bad number `{v}`")))
                };
                let law = WeightLaw::LogNormal { mu: parse(a)?, sigma2: parse(b)? };
                law.validate()?;
                Ok(law)
            }
        }
    }
}

/// Pre-built gain sampler for hot loops.
#[derive(Debug, Clone)]
pub struct GainSampler {
    fading: Gamma<f64>,
    shadow: Option<Normal<f64>>,
    mu: f64,
}

impl GainSampler {
    pub fn new(cp: &ChannelParams) -> Self {
        let fading = Gamma::new(cp.m, 1.0 / cp.m).expect("validated channel params");
        let shadow = (cp.sigma2 > 0.0).then(|| Normal::new(cp.mu, cp.sigma()).expect("validated"));
        Self { fading, shadow, mu: cp.mu }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = self.fading.sample(rng);
        let ln_x = match &self.shadow {
            Some(n) => n.sample(rng),
            None => self.mu,
        };
        g * ln_x.exp()
    }

    #[inline]
    pub fn sample_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = self.fading.sample(rng);
        let ln_x = match &self.shadow {
            Some(n) => n.sample(rng),
            None => self.mu,
        };
        g.ln() + ln_x
    }
}

pub fn sample_gain<R: Rng + ?Sized>(cp: &ChannelParams, rng: &mut R) -> f64 {
    GainSampler::new(cp).sample(rng)
}

fn ln_gamma_pdf(h: f64, shape: f64, scale: f64) -> f64 {
    (shape - 1.0) * h.ln() - h / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Density of the composite gain at `h`, by quadrature of the mixture over the
/// shadowing variable on a log axis.
pub fn gain_pdf(cp: &ChannelParams, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("density defined for h > 0, got {h}")));
    }
    if cp.sigma2 == 0.0 {
        return Ok(ln_gamma_pdf(h, cp.m, cp.mu.exp() / cp.m).exp());
    }
    let sigma = cp.sigma();
    let ln_norm = -0.5 * (2.0 * std::f64::consts::PI).ln();
    // x = exp(μ + σ z), z standard normal
    let integrand = |z: f64| {
        let scale = (cp.mu + sigma * z).exp() / cp.m;
        (ln_norm - 0.5 * z * z + ln_gamma_pdf(h, cp.m, scale)).exp()
    };
    let (v, _) = quadrature::integrate(integrand, -12.0, 12.0, 1e-8)?;
    Ok(v)
}

/// E[(WH)^p]. Returns +∞ when the moment diverges (unit or log-normal weights
/// with m + p ≤ 0).
pub fn fractional_moment(cp: &ChannelParams, law: &WeightLaw, p: f64) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    let gain = |p: f64| {
        if cp.m + p <= 0.0 {
            return f64::INFINITY;
        }
        (ln_gamma(cp.m + p) - ln_gamma(cp.m) - p * cp.m.ln() + p * cp.mu + 0.5 * p * p * cp.sigma2).exp()
    };
    match *law {
        WeightLaw::Nearest => 1.0,
        WeightLaw::Unit => gain(p),
        WeightLaw::LogNormal { mu, sigma2 } => gain(p) * (p * mu + 0.5 * p * p * sigma2).exp(),
    }
}

/// ζ† = E[(WH)^{2/α}] · E[(WH)^{-2/α}], or +∞ when either factor diverges.
pub fn zeta_dagger(cp: &ChannelParams, law: &WeightLaw) -> f64 {
    let p = 2.0 / cp.alpha;
    let a = fractional_moment(cp, law, p);
    let b = fractional_moment(cp, law, -p);
    if a.is_finite() && b.is_finite() {
        a * b
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_var;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cp(m: f64, mu: f64, sigma2: f64, alpha: f64) -> ChannelParams {
        ChannelParams::new(m, mu, sigma2, alpha).unwrap()
    }

    fn draws(c: &ChannelParams, n: usize, seed: u64) -> Vec<f64> {
        let s = GainSampler::new(c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| s.sample(&mut rng)).collect()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ChannelParams::new(0.0, 0.0, 0.0, 4.0).is_err());
        assert!(ChannelParams::new(1.0, 0.0, -1.0, 4.0).is_err());
        assert!(ChannelParams::new(1.0, 0.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn degenerate_fading_concentrates_at_one() {
        let xs = draws(&cp(1e6, 0.0, 0.0, 4.0), 10_000, 1);
        let (_, var) = mean_var(&xs);
        assert!(var.sqrt() < 1e-2);
    }

    #[test]
    fn sample_means() {
        for (c, expect) in [(cp(1.0, 0.0, 0.0, 4.0), 1.0), (cp(1.0, 0.0, 1.0, 4.0), 0.5f64.exp())] {
            let xs = draws(&c, 100_000, 2);
            let (mean, var) = mean_var(&xs);
            let se = (var / xs.len() as f64).sqrt();
            assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} (se {se})");
            assert_abs_diff_eq!(c.mean_gain(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn pdf_collapses_to_exponential() {
        let c = cp(1.0, 0.0, 0.0, 4.0);
        for h in [0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(gain_pdf(&c, h).unwrap(), (-h).exp(), epsilon = 1e-6);
        }
        assert!(gain_pdf(&c, 0.0).is_err());
    }

    #[test]
    fn pdf_normalises() {
        let c = cp(2.0, 0.3, 0.8, 4.0);
        let (v, _) = quadrature::integrate_to_infinity(|h| if h > 0.0 { gain_pdf(&c, h).unwrap() } else { 0.0 }, 0.0, 1e-7)
            .unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn fractional_moment_against_quadrature() {
        // independent route: ∫ h^p f_H(h) dh
        let c = cp(1.0, 0.0, 0.0, 4.0);
        let (oracle, _) = quadrature::integrate_to_infinity(|h| h.powf(0.5) * gain_pdf(&c, h.max(1e-300)).unwrap(), 0.0, 1e-10)
            .unwrap();
        assert_abs_diff_eq!(oracle, 0.886_226_925_452_758, epsilon = 1e-7);
        assert_abs_diff_eq!(fractional_moment(&c, &WeightLaw::Unit, 0.5), oracle, epsilon = 1e-7);

        let c = cp(2.0, 0.2, 0.5, 3.0);
        for p in [-0.6, 0.4, 1.3] {
            let (oracle, _) = quadrature::integrate_to_infinity(
                |h| if h > 0.0 { h.powf(p) * gain_pdf(&c, h).unwrap() } else { 0.0 },
                0.0,
                1e-9,
            )
            .unwrap();
            let m = fractional_moment(&c, &WeightLaw::Unit, p);
            assert!((m - oracle).abs() < 1e-4 * oracle.max(1.0), "p={p}: {m} vs {oracle}");
        }
    }

    #[test]
    fn fractional_moment_trivia() {
        let c = cp(1.3, 0.1, 0.4, 3.5);
        assert_eq!(fractional_moment(&c, &WeightLaw::Unit, 0.0), 1.0);
        assert_eq!(fractional_moment(&c, &WeightLaw::Nearest, 0.7), 1.0);
        assert_eq!(fractional_moment(&c, &WeightLaw::Unit, -1.3), f64::INFINITY);
        let ln = WeightLaw::LogNormal { mu: 0.5, sigma2: 0.2 };
        let p = 0.4;
        let expect = fractional_moment(&c, &WeightLaw::Unit, p) * (p * 0.5 + 0.5 * p * p * 0.2f64).exp();
        assert_abs_diff_eq!(fractional_moment(&c, &ln, p), expect, epsilon = 1e-12);
    }

    #[test]
    fn zeta_dagger_values() {
        assert_eq!(zeta_dagger(&cp(1.0, 0.0, 0.0, 4.0), &WeightLaw::Nearest), 1.0);
        assert_abs_diff_eq!(zeta_dagger(&cp(1.0, 0.0, 0.0, 4.0), &WeightLaw::Unit), PI / 2.0, epsilon = 1e-12);
        for s in [0.3, 1.0, 3.39] {
            let z = zeta_dagger(&cp(1.0, 0.0, s, 4.0), &WeightLaw::Unit);
            assert_abs_diff_eq!(z, PI / 2.0 * (4.0 * s / 16.0f64).exp(), epsilon = 1e-10);
        }
        assert_eq!(zeta_dagger(&cp(0.4, 0.0, 0.0, 4.0), &WeightLaw::Unit), f64::INFINITY);
        assert_eq!(zeta_dagger(&cp(0.5, 0.0, 0.0, 4.0), &WeightLaw::Unit), f64::INFINITY);
    }

    #[test]
    fn zeta_dagger_at_least_one_and_mu_invariant() {
        for m in [0.8, 1.0, 2.0, 4.0] {
            for alpha in [2.5, 3.0, 4.0, 6.0] {
                for s in [0.0, 0.5, 2.0] {
                    let base = zeta_dagger(&cp(m, 0.0, s, alpha), &WeightLaw::Unit);
                    assert!(base >= 1.0);
                    for mu in [-2.0, 0.7, 3.0] {
                        let z = zeta_dagger(&cp(m, mu, s, alpha), &WeightLaw::Unit);
                        if base.is_infinite() {
                            assert!(z.is_infinite());
                        } else {
                            assert!((z - base).abs() < 1e-10 * base);
                        }
                    }
                }
            }
        }
        // WH constant => equality
        assert_eq!(zeta_dagger(&cp(1e9, 0.0, 0.0, 4.0), &WeightLaw::Nearest), 1.0);
    }

    #[test]
    fn sample_moments_match_closed_form() {
        let mut idx = 0;
        for m in [0.8, 1.0, 2.0, 4.0] {
            for alpha in [3.0, 4.0] {
                let c = cp(m, 0.1, 0.3, alpha);
                let xs = draws(&c, 100_000, 50 + idx);
                idx += 1;
                for p in [2.0 / alpha, -2.0 / alpha] {
                    let ys: Vec<f64> = xs.iter().map(|h| h.powf(p)).collect();
                    let (mean, var) = mean_var(&ys);
                    let se = (var / ys.len() as f64).sqrt();
                    let exact = fractional_moment(&c, &WeightLaw::Unit, p);
                    assert!((mean - exact).abs() < 3.0 * se, "m={m} α={alpha} p={p}: {mean} vs {exact} se {se}");
                }
            }
        }
    }

    #[test]
    fn sampler_matches_pdf_histogram() {
        use crate::stats::chi_square_sf;
        let c = cp(2.0, 0.0, 0.5, 4.0);
        let n = 1_000_000;
        let xs = draws(&c, n, 9);
        // bins between sample quantiles, expected masses from the pdf
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let k = 40;
        let edges: Vec<f64> = (1..k).map(|i| sorted[i * n / k]).collect();
        let mut bounds = vec![0.0];
        bounds.extend(edges);
        let mut counts = vec![0usize; k];
        for &x in &xs {
            let b = bounds.partition_point(|&e| e <= x) - 1;
            counts[b] += 1;
        }
        let mut stat = 0.0;
        let mut lo = 0.0;
        let mut mass_lo = 0.0;
        for i in 0..k {
            let mass_hi = if i + 1 < k {
                let hi = bounds[i + 1];
                let (m, _) = quadrature::integrate(|h| if h > 0.0 { gain_pdf(&c, h).unwrap() } else { 0.0 }, lo, hi, 1e-10)
                    .unwrap();
                lo = hi;
                mass_lo + m
            } else {
                1.0
            };
            let e = (mass_hi - mass_lo) * n as f64;
            stat += (counts[i] as f64 - e).powi(2) / e;
            mass_lo = mass_hi;
        }
        // bins were chosen from the data: conservative dof
        assert!(chi_square_sf(stat, (k - 1) as f64) > 0.01, "chi2 = {stat}");
    }

    #[test]
    fn db_conventions() {
        let k = std::f64::consts::LN_10 / 10.0;
        assert_abs_diff_eq!(DbConvention::SigmaInDb.to_sigma2_ln(8.0), (8.0 * k).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(DbConvention::Sigma2InDb.to_sigma2_ln(8.0), 8.0 * k * k, epsilon = 1e-12);
    }

    #[test]
    fn law_parsing() {
        assert_eq!("nearest".parse::<WeightLaw>().unwrap(), WeightLaw::Nearest);
        assert_eq!("unit".parse::<WeightLaw>().unwrap(), WeightLaw::Unit);
        assert_eq!(
            "lognormal:0.5,1.2".parse::<WeightLaw>().unwrap(),
            WeightLaw::LogNormal { mu: 0.5, sigma2: 1.2 }
        );
        assert!("lognormal:0.5".parse::<WeightLaw>().is_err());
        assert!("strongest".parse::<WeightLaw>().is_err());
    }
}
