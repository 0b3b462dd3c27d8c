//! Homogeneous Poisson point processes, random scaling maps and count
//! statistics.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal as NormalDist};

use crate::channel::{fractional_moment, ChannelParams, GainSampler, WeightLaw};
use crate::error::{Error, Result};
use crate::geometry::{Point2, SimulationWindow};
use crate::stats::chi_square_cdf;

/// A finite realisation of a point process on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    points: Vec<Point2>,
    window: SimulationWindow,
    intensity_declared: f64,
}

impl PointPattern {
    pub fn new(points: Vec<Point2>, window: SimulationWindow, intensity_declared: f64) -> Result<Self> {
        if !(intensity_declared >= 0.0) {
            return Err(Error::invalid("intensity", format!("must be >= 0, got {intensity_declared}")));
        }
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::invalid("points", format!("{p:?} lies outside the window")));
        }
        Ok(Self { points, window, intensity_declared })
    }

    pub fn empty(window: SimulationWindow) -> Self {
        Self { points: Vec::new(), window, intensity_declared: 0.0 }
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn window(&self) -> &SimulationWindow {
        &self.window
    }

    pub fn intensity_declared(&self) -> f64 {
        self.intensity_declared
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points per unit area actually observed (over the full sampling region).
    pub fn empirical_intensity(&self) -> f64 {
        self.points.len() as f64 / self.window.sampling_area()
    }

    pub fn count_within(&self, center: Point2, r: f64) -> usize {
        let r2 = r * r;
        self.points.iter().filter(|p| self.window.distance_sq(center, **p) <= r2).count()
    }

    /// Shift every point by `(dx, dy)`, wrapping on the torus.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| self.window.wrap(Point2::new(p.x + dx, p.y + dy)))
            .collect();
        Self { points, ..self.clone() }
    }

    pub(crate) fn with_points(&self, points: Vec<Point2>, intensity_declared: f64) -> Self {
        Self { points, window: self.window, intensity_declared }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y")?;
        for p in &self.points {
            writeln!(out, "{},{}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, window: SimulationWindow, intensity_declared: f64) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line == "x,y") {
                continue;
            }
            let (x, y) = line
                .split_once(',')
                .ok_or_else(|| Error::invalid("csv", format!("line {}: expected `x,y`", i + 1)))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid("csv", format!("line {}: bad number `{v}`", i + 1)))
            };
            points.push(Point2::new(parse(x)?, parse(y)?));
        }
        Self::new(points, window, intensity_declared)
    }
}

/// Sample a homogeneous PPP over the whole window.
pub fn sample_ppp<R: Rng + ?Sized>(intensity: f64, w: &SimulationWindow, rng: &mut R) -> Result<PointPattern> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::invalid("intensity", format!("must be >= 0, got {intensity}")));
    }
    let n = poisson_count(intensity * w.sampling_area(), rng);
    let points = (0..n).map(|_| w.uniform_point(rng)).collect();
    Ok(PointPattern { points, window: *w, intensity_declared: intensity })
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

/// Per-point isotropic scale factor `t` (the map `x ↦ t·x`).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ScalingMark(f64);

impl ScalingMark {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 {
            Ok(Self(t))
        } else {
            Err(Error::invalid("mark", format!("scale factor must be finite and > 0, got {t}")))
        }
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

/// I.i.d. law of the scale factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarkLaw {
    Deterministic { t: f64 },
    /// ln T ~ N(mu, sigma2).
    LogNormal { mu: f64, sigma2: f64 },
    /// T = (W·H)^{-1/α}: the map that turns weighted association into
    /// nearest-point association.
    ChannelTransform { channel: ChannelParams, law: WeightLaw },
}

impl MarkLaw {
    pub fn label(&self) -> String {
        match self {
            MarkLaw::Deterministic { t } => format!("deterministic:{t}"),
            MarkLaw::LogNormal { mu, sigma2 } => format!("lognormal:{mu},{sigma2}"),
            MarkLaw::ChannelTransform { channel, law } => format!(
                "channel:m={},mu={},sigma2={},alpha={},law={}",
                channel.m,
                channel.mu,
                channel.sigma2,
                channel.alpha,
                law.label()
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarkLaw::Deterministic { t } => ScalingMark::new(t).map(|_| ()),
            MarkLaw::LogNormal { mu, sigma2 } => {
                if mu.is_finite() && sigma2.is_finite() && sigma2 >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("mark law", "log-normal needs finite mu and sigma2 >= 0"))
                }
            }
            MarkLaw::ChannelTransform { channel, law } => {
                channel.validate()?;
                law.validate()
            }
        }
    }

    pub fn sampler(&self) -> MarkSampler {
        MarkSampler {
            law: *self,
            gains: match self {
                MarkLaw::ChannelTransform { channel, .. } => Some(GainSampler::new(channel)),
                _ => None,
            },
        }
    }

    /// E[T^{-2}], the intensity multiplier of the mapped process.
    pub fn mean_inv_sq(&self) -> f64 {
        match *self {
            MarkLaw::Deterministic { t } => 1.0 / (t * t),
            MarkLaw::LogNormal { mu, sigma2 } => (-2.0 * mu + 2.0 * sigma2).exp(),
            MarkLaw::ChannelTransform { channel, law } => fractional_moment(&channel, &law, 2.0 / channel.alpha),
        }
    }

    /// A scale `t_min` such that the T^{-2}-weighted mass of `{T < t_min}`
    /// is at most `tail` relative to E[T^{-2}]. Points mapped with smaller
    /// factors come from beyond the truncated source region.
    pub fn lower_scale(&self, tail: f64) -> f64 {
        match *self {
            MarkLaw::Deterministic { t } => t,
            MarkLaw::LogNormal { mu, sigma2 } => {
                // the T^{-2} tilt moves ln T to N(mu - 2σ², σ²)
                let z = NormalDist::standard().inverse_cdf(1.0 - tail);
                (mu - 2.0 * sigma2 - z * sigma2.sqrt()).exp()
            }
            MarkLaw::ChannelTransform { channel, law } => {
                // T small <=> W·H large. Tilting by (WH)^{2/α} keeps the
                // factors independent, so a union bound over them holds.
                let p = 2.0 / channel.alpha;
                let share = tail / 3.0;
                let zs = NormalDist::standard().inverse_cdf(1.0 - share);
                let ln_fading = GammaDist::new(channel.m + p, channel.m)
                    .map(|g| g.inverse_cdf(1.0 - share).ln())
                    .unwrap_or(0.0);
                let ln_shadow = channel.mu + p * channel.sigma2 + zs * channel.sigma();
                let ln_weight = match law {
                    WeightLaw::Nearest => return 1.0,
                    WeightLaw::Unit => 0.0,
                    WeightLaw::LogNormal { mu, sigma2 } => mu + p * sigma2 + zs * sigma2.sqrt(),
                };
                (-(ln_fading + ln_shadow + ln_weight) / channel.alpha).exp()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarkSampler {
    law: MarkLaw,
    gains: Option<GainSampler>,
}

impl MarkSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ScalingMark {
        let t = match self.law {
            MarkLaw::Deterministic { t } => t,
            MarkLaw::LogNormal { mu, sigma2 } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                (mu + sigma2.sqrt() * z).exp()
            }
            MarkLaw::ChannelTransform { channel, law } => match law {
                WeightLaw::Nearest => 1.0,
                _ => {
                    let ln_wh = law.sample_ln_weight(rng) + self.gains.as_ref().expect("channel law").sample_ln(rng);
                    (-ln_wh / channel.alpha).exp()
                }
            },
        };
        ScalingMark(t.max(f64::MIN_POSITIVE))
    }
}

/// Apply `x ↦ c + t_i (x - c)` to every point, `c` the centre of the source
/// window, and keep the images that land in `target` (which must share that
/// centre). Declared output intensity is the plug-in `λ · mean(1/t²)` over
/// the supplied marks.
///
/// The source pattern has to cover every location that can be mapped into
/// `target`; [`sample_mapped_ppp`] sizes it from the mark law.
pub fn map_pattern(p: &PointPattern, marks: &[ScalingMark], target: &SimulationWindow) -> Result<PointPattern> {
    if marks.len() != p.len() {
        return Err(Error::invalid("marks", format!("{} marks for {} points", marks.len(), p.len())));
    }
    let plug_in = if marks.is_empty() {
        1.0
    } else {
        marks.iter().map(|t| 1.0 / (t.0 * t.0)).sum::<f64>() / marks.len() as f64
    };
    Ok(map_with_declared(p, marks, target, p.intensity_declared * plug_in))
}

fn map_with_declared(p: &PointPattern, marks: &[ScalingMark], target: &SimulationWindow, declared: f64) -> PointPattern {
    let c = p.window.center();
    let tc = target.center();
    let points = p
        .points
        .iter()
        .zip(marks)
        .filter_map(|(x, t)| {
            let t = t.0;
            let img = if t == 1.0 && c == tc {
                *x
            } else {
                Point2::new(tc.x + t * (x.x - c.x), tc.y + t * (x.y - c.y))
            };
            target.contains(img).then_some(img)
        })
        .collect();
    PointPattern { points, window: *target, intensity_declared: declared }
}

/// Sample a PPP of intensity `lambda`, mark it i.i.d. from `law` and return
/// its image inside `target`. The source region is enlarged so that the
/// truncated part carries at most `tail` (relative) of the mapped intensity.
/// Declared intensity is `λ·E[T^{-2}]`.
pub fn sample_mapped_ppp<R: Rng + ?Sized>(
    lambda: f64,
    law: &MarkLaw,
    target: &SimulationWindow,
    tail: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    law.validate()?;
    let t_min = law.lower_scale(tail);
    let source_side = target.side() / t_min.min(1.0e12);
    if !source_side.is_finite() || source_side > 1e4 * target.side() {
        return Err(Error::invalid("mark law", format!("source region too large (t_min = {t_min:.3e})")));
    }
    let source_window = SimulationWindow::new(source_side.max(target.side()), target.metric(), 0.0)?;
    let source = sample_ppp(lambda, &source_window, rng)?;
    let sampler = law.sampler();
    let marks: Vec<ScalingMark> = (0..source.len()).map(|_| sampler.sample(rng)).collect();
    Ok(map_with_declared(&source, &marks, target, lambda * law.mean_inv_sq()))
}

/// Distance from `origin` to the closest point of `p`.
pub fn nearest_distance(origin: Point2, p: &PointPattern, w: &SimulationWindow) -> Result<f64> {
    p.points
        .iter()
        .map(|q| w.distance_sq(origin, *q))
        .min_by(f64::total_cmp)
        .map(f64::sqrt)
        .ok_or(Error::EmptyPattern)
}

/// Quadrat-count dispersion test of complete spatial randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrReport {
    pub statistic: f64,
    pub dof: usize,
    /// Two-sided: small for both over-dispersed (clustered) and
    /// under-dispersed (regular) patterns.
    pub p_value: f64,
    pub counts: Vec<usize>,
}

pub const CSR_MIN_EXPECTED: f64 = 5.0;

/// Chi-square test of quadrat counts on a `grid × grid` partition of the
/// observation window against Poisson counts with the empirical mean.
pub fn csr_test(p: &PointPattern, grid: usize) -> Result<CsrReport> {
    if grid < 2 {
        return Err(Error::invalid("grid", "need at least a 2x2 grid"));
    }
    let w = p.window;
    let lo = w.guard_fraction() * w.side();
    let width = (w.side() - 2.0 * lo) / grid as f64;
    let mut counts = vec![0usize; grid * grid];
    let mut total = 0usize;
    for q in &p.points {
        if !w.in_observation(*q) {
            continue;
        }
        let i = (((q.x - lo) / width) as usize).min(grid - 1);
        let j = (((q.y - lo) / width) as usize).min(grid - 1);
        counts[i * grid + j] += 1;
        total += 1;
    }
    let k = counts.len();
    let mean = total as f64 / k as f64;
    if mean < CSR_MIN_EXPECTED {
        return Err(Error::UndersizedPattern {
            what: "quadrat test",
            reason: format!("{mean:.2} expected points per quadrat, need {CSR_MIN_EXPECTED}"),
        });
    }
    let statistic: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
    let dof = k - 1;
    let cdf = chi_square_cdf(statistic, dof as f64);
    let p_value = (2.0 * cdf.min(1.0 - cdf)).clamp(0.0, 1.0);
    Ok(CsrReport { statistic, dof, p_value, counts })
}
