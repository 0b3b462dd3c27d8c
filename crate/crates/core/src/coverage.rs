//! SIR coverage at a typical user under three interference models.
//!
//! The typical user sits at the window centre and joins the association
//! like any other user, so its serving base station is never void.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{rho_rca, void_prob_rca};
use crate::association::{associate, path_loss};
use crate::channel::{ChannelParams, GainSampler, WeightLaw};
use crate::error::{Error, Result};
use crate::geometry::{auto_side, SimulationWindow};
use crate::par::{map_replications, Streams};
use crate::point_process::{sample_ppp, PointPattern};
use crate::stats::EstimateWithCI;

const STREAM_COVERAGE: u64 = 0x63_6f76;

/// Which base stations transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceModel {
    /// Every base station, void or not.
    AllBs,
    /// Only base stations with at least one user.
    VoidAware,
    /// Each base station independently with probability `1 - p_∅` from the
    /// closed-form void probability.
    ThinnedPpp,
}

impl InterferenceModel {
    pub const ALL: [InterferenceModel; 3] = [Self::AllBs, Self::VoidAware, Self::ThinnedPpp];

    pub fn label(&self) -> &'static str {
        match self {
            Self::AllBs => "all-bs",
            Self::VoidAware => "void-aware",
            Self::ThinnedPpp => "thinned-ppp",
        }
    }
}

impl std::str::FromStr for InterferenceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::invalid("model", format!("unknown model `{s}` (all-bs, void-aware, thinned-ppp)")))
    }
}

/// Gain of the serving link in the SIR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServingGain {
    /// The realisation that drove association.
    #[default]
    Reuse,
    /// A fresh draw.
    Redraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub beta: f64,
    pub lambda_b: f64,
    pub lambda_u: f64,
    pub channel: ChannelParams,
    pub law: WeightLaw,
    pub model: InterferenceModel,
    pub reps: u64,
    #[serde(default)]
    pub serving_gain: ServingGain,
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || self.beta.is_nan() {
            return Err(Error::invalid("beta", "must be > 0"));
        }
        if !(self.lambda_b > 0.0 && self.lambda_b.is_finite()) {
            return Err(Error::invalid("lambda_b", "no base stations (need lambda_b > 0)"));
        }
        if !(self.lambda_u >= 0.0 && self.lambda_u.is_finite()) {
            return Err(Error::invalid("lambda_u", "must be >= 0"));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps", "need at least one replication"));
        }
        self.channel.validate()?;
        self.law.validate()
    }

    /// Retention probability of the thinned model.
    pub fn retention(&self) -> f64 {
        1.0 - void_prob_rca(self.lambda_u, self.lambda_b, rho_rca(&self.channel, &self.law))
    }
}

/// A non-serving base station as seen from the typical user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    /// `H' · d^{-α}` with a fresh gain.
    pub power: f64,
    pub has_users: bool,
    /// Outcome of the independent thinning coin.
    pub retained: bool,
}

/// Everything the three models need from one network draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub serving_power: f64,
    pub interferers: Vec<Interferer>,
}

impl Realization {
    /// Draw base stations and users, add the typical user at the centre,
    /// associate, then draw interfering gains and thinning coins for every
    /// non-serving base station.
    pub fn sample<R: Rng + ?Sized>(cfg: &CoverageConfig, w: &SimulationWindow, rng: &mut R) -> Result<Self> {
        let bs = sample_ppp(cfg.lambda_b, w, rng)?;
        if bs.is_empty() {
            return Err(Error::NoBaseStations);
        }
        let drawn = sample_ppp(cfg.lambda_u, w, rng)?;
        let origin = w.center();
        let mut pts = Vec::with_capacity(drawn.len() + 1);
        pts.push(origin);
        pts.extend_from_slice(drawn.points());
        let users = PointPattern::new(pts, *w, cfg.lambda_u)?;
        let out = associate(&bs, &users, &cfg.channel, &cfg.law, rng)?;
        let serving = out.assignments[0];
        let gains = GainSampler::new(&cfg.channel);
        let h = match cfg.serving_gain {
            ServingGain::Reuse => out.serving_gain[0],
            ServingGain::Redraw => gains.sample(rng),
        };
        let serving_power = h * path_loss(out.serving_distance[0].powi(2), cfg.channel.alpha);
        let keep = cfg.retention();
        let interferers = bs
            .points()
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != serving)
            .map(|(j, b)| {
                let power = gains.sample(rng) * path_loss(w.distance_sq(origin, *b), cfg.channel.alpha);
                let retained = rng.random::<f64>() < keep;
                Interferer { power, has_users: out.cell_counts[j] > 0, retained }
            })
            .collect();
        Ok(Self { serving_power, interferers })
    }
}

/// `S / I`; `+∞` when nobody interferes.
pub fn sir_at_typical_user(r: &Realization, model: InterferenceModel) -> f64 {
    let i: f64 = r
        .interferers
        .iter()
        .filter(|x| match model {
            InterferenceModel::AllBs => true,
            InterferenceModel::VoidAware => x.has_users,
            InterferenceModel::ThinnedPpp => x.retained,
        })
        .map(|x| x.power)
        .sum();
    if i > 0.0 {
        r.serving_power / i
    } else {
        f64::INFINITY
    }
}

/// SIR under every model, from the same network draws, one entry per
/// replication.
pub fn coupled_sir(cfg: &CoverageConfig, w: &SimulationWindow, seed: u64) -> Result<Vec<[f64; 3]>> {
    cfg.validate()?;
    let streams = Streams::new(seed);
    map_replications(cfg.reps, |rep| {
        let mut rng = streams.rng(STREAM_COVERAGE, rep);
        let r = Realization::sample(cfg, w, &mut rng)?;
        Ok(InterferenceModel::ALL.map(|m| sir_at_typical_user(&r, m)))
    })
    .into_iter()
    .collect()
}

fn model_index(m: InterferenceModel) -> usize {
    InterferenceModel::ALL.iter().position(|x| *x == m).expect("listed")
}

fn covered_fraction(sirs: &[[f64; 3]], model: InterferenceModel, beta: f64, seed: u64) -> EstimateWithCI {
    let k = model_index(model);
    let hits = sirs.iter().filter(|s| s[k] >= beta).count() as u64;
    let n = sirs.len() as u64;
    EstimateWithCI::from_bernoulli(hits, n, n, seed)
}

/// `P[SIR ≥ β]` for `cfg.model`.
pub fn coverage_probability(cfg: &CoverageConfig, w: &SimulationWindow, seed: u64) -> Result<EstimateWithCI> {
    let sirs = coupled_sir(cfg, w, seed)?;
    Ok(covered_fraction(&sirs, cfg.model, cfg.beta, seed))
}

/// Coverage at each threshold, all from the same draws.
pub fn coverage_curve(cfg: &CoverageConfig, betas: &[f64], w: &SimulationWindow, seed: u64) -> Result<Vec<EstimateWithCI>> {
    if betas.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::invalid("beta", "must be > 0"));
    }
    let sirs = coupled_sir(cfg, w, seed)?;
    Ok(betas.iter().map(|&b| covered_fraction(&sirs, cfg.model, b, seed)).collect())
}

/// One line of a coverage sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub ratio: f64,
    pub lambda_b: f64,
    pub lambda_u: f64,
    pub side: f64,
    pub model: InterferenceModel,
    pub beta: f64,
    pub estimate: EstimateWithCI,
    /// Closed-form void probability used by the thinned model.
    pub p_void_formula: f64,
}

/// Coverage over a grid of `λ_U/λ_B` at fixed `λ_U`, for every model and
/// threshold. `side = None` sizes the window per ratio automatically. Each
/// ratio gets its own stream; the three models share draws.
pub fn coverage_sweep(
    base: &CoverageConfig,
    ratios: &[f64],
    betas: &[f64],
    side: Option<f64>,
    seed: u64,
) -> Result<Vec<CoverageRow>> {
    if ratios.is_empty() || betas.is_empty() {
        return Err(Error::invalid("ratio_grid", "sweep needs at least one ratio and one beta"));
    }
    if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("ratio_grid", "ratios must be positive and finite"));
    }
    let streams = Streams::new(seed);
    let mut rows = Vec::with_capacity(ratios.len() * betas.len() * 3);
    for (i, &ratio) in ratios.iter().enumerate() {
        let cfg = CoverageConfig { lambda_b: base.lambda_u / ratio, ..*base };
        let s = match side {
            Some(s) => s,
            None => auto_side(cfg.lambda_b, cfg.lambda_u)?,
        };
        let w = SimulationWindow::toroidal(s)?;
        let sub_seed = streams.fork(i as u64).seed();
        let sirs = coupled_sir(&cfg, &w, sub_seed)?;
        let p_void = 1.0 - cfg.retention();
        for &beta in betas {
            for model in InterferenceModel::ALL {
                rows.push(CoverageRow {
                    ratio,
                    lambda_b: cfg.lambda_b,
                    lambda_u: cfg.lambda_u,
                    side: s,
                    model,
                    beta,
                    estimate: covered_fraction(&sirs, model, beta, sub_seed),
                    p_void_formula: p_void,
                });
            }
        }
    }
    Ok(rows)
}
