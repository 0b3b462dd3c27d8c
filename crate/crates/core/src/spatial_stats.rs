//! Ripley's K function and Monte-Carlo envelope tests, used to check whether
//! the pattern of associated base stations still looks Poisson.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::association::{associate, associated_pattern, VoidExperiment};
use crate::error::{Error, Result};
use crate::geometry::SimulationWindow;
use crate::par::{map_replications, map_replications_seq, Streams};
use crate::point_process::{sample_ppp, PointPattern};

pub const MIN_POINTS: usize = 10;
pub const DEFAULT_ENVELOPE_SIMS: usize = 199;

const STREAM_ENVELOPE: u64 = 0x65_6e76;
const STREAM_REMARK2: u64 = 0x726d_6b32;

/// K̂ at a set of radii, optionally with simulation envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFunctionEstimate {
    pub radii: Vec<f64>,
    pub k_hat: Vec<f64>,
    pub envelope_low: Vec<f64>,
    pub envelope_high: Vec<f64>,
    pub n_envelope: usize,
}

impl KFunctionEstimate {
    /// Radii at which K̂ falls strictly outside the envelope.
    pub fn exits(&self) -> Vec<bool> {
        self.k_hat
            .iter()
            .zip(self.envelope_low.iter().zip(&self.envelope_high))
            .map(|(k, (lo, hi))| k < lo || k > hi)
            .collect()
    }

    pub fn exit_fraction(&self) -> f64 {
        let e = self.exits();
        e.iter().filter(|&&x| x).count() as f64 / e.len().max(1) as f64
    }

    /// Columns `r,k_hat,lo,hi,pi_r_sq`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,k_hat,lo,hi,pi_r_sq")?;
        for i in 0..self.radii.len() {
            let r = self.radii[i];
            let lo = self.envelope_low.get(i).copied().unwrap_or(f64::NAN);
            let hi = self.envelope_high.get(i).copied().unwrap_or(f64::NAN);
            writeln!(out, "{r},{},{lo},{hi},{}", self.k_hat[i], std::f64::consts::PI * r * r)?;
        }
        Ok(())
    }
}

fn check_radii(radii: &[f64], max: f64) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::invalid("radii", "need at least one radius"));
    }
    if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("radii", "must be positive and strictly increasing"));
    }
    if radii[radii.len() - 1] > max * (1.0 + 1e-12) {
        return Err(Error::invalid("radii", format!("largest radius exceeds {max}")));
    }
    Ok(())
}

/// Ripley's K̂. On the torus every pair is counted with wrapped distances;
/// under the guard metric only points of the observation window act as
/// centres (minus sampling).
pub fn ripley_k(p: &PointPattern, radii: &[f64]) -> Result<Vec<f64>> {
    let w = p.window();
    check_radii(radii, w.max_distance())?;
    let pts = p.points();
    let n = pts.len();
    if n < MIN_POINTS {
        return Err(Error::UndersizedPattern {
            what: "K function",
            reason: format!("{n} points, need {MIN_POINTS}"),
        });
    }
    let r_max2 = radii[radii.len() - 1].powi(2);
    let radii2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let mut bins = vec![0u64; radii.len()];
    let mut tally = |d2: f64, weight: u64| {
        if d2 <= r_max2 {
            bins[radii2.partition_point(|&r2| r2 < d2)] += weight;
        }
    };
    if w.is_toroidal() {
        for i in 0..n {
            for j in (i + 1)..n {
                tally(w.distance_sq(pts[i], pts[j]), 2);
            }
        }
        let scale = w.area() / (n as f64 * (n as f64 - 1.0));
        Ok(cumulate(&bins, scale))
    } else {
        let centres: Vec<usize> = (0..n).filter(|&i| w.in_observation(pts[i])).collect();
        if centres.is_empty() {
            return Err(Error::UndersizedPattern { what: "K function", reason: "no points in the observation window".into() });
        }
        for &i in &centres {
            for j in 0..n {
                if j != i {
                    tally(w.distance_sq(pts[i], pts[j]), 1);
                }
            }
        }
        let lambda = n as f64 / w.sampling_area();
        Ok(cumulate(&bins, 1.0 / (lambda * centres.len() as f64)))
    }
}

fn cumulate(bins: &[u64], scale: f64) -> Vec<f64> {
    let mut acc = 0u64;
    bins.iter()
        .map(|&b| {
            acc += b;
            acc as f64 * scale
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    MinMax,
    /// Pointwise order statistics at `tail` and `1 - tail`.
    Percentile { tail: f64 },
}

impl Default for EnvelopeKind {
    fn default() -> Self {
        EnvelopeKind::Percentile { tail: 0.025 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub n_envelope: usize,
}

fn envelope_from(mut curves: Vec<Vec<f64>>, kind: EnvelopeKind) -> Envelope {
    let n = curves.len();
    let nr = curves[0].len();
    let rank = match kind {
        EnvelopeKind::MinMax => 1,
        EnvelopeKind::Percentile { tail } => ((tail * (n + 1) as f64).round() as usize).clamp(1, n),
    };
    let mut low = Vec::with_capacity(nr);
    let mut high = Vec::with_capacity(nr);
    let mut col = vec![0.0; n];
    for r in 0..nr {
        for (c, curve) in col.iter_mut().zip(curves.iter_mut()) {
            *c = curve[r];
        }
        col.sort_by(f64::total_cmp);
        low.push(col[rank - 1]);
        high.push(col[n - rank]);
    }
    Envelope { low, high, n_envelope: n }
}

fn simulate_envelope<F>(radii: &[f64], n_envelope: usize, kind: EnvelopeKind, seq: bool, seed: u64, make: F) -> Result<Envelope>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<PointPattern> + Sync + Send,
{
    if n_envelope < 39 {
        return Err(Error::invalid("n_envelope", format!("need at least 39 simulations, got {n_envelope}")));
    }
    let streams = Streams::new(seed);
    let one = |i: u64| -> Result<Vec<f64>> {
        let mut rng = streams.rng(STREAM_ENVELOPE, i);
        ripley_k(&make(&mut rng)?, radii)
    };
    let curves: Result<Vec<Vec<f64>>> = if seq {
        map_replications_seq(n_envelope as u64, one).into_iter().collect()
    } else {
        map_replications(n_envelope as u64, one).into_iter().collect()
    };
    Ok(envelope_from(curves?, kind))
}

/// Pointwise envelope of K̂ over `n_envelope` PPPs of intensity `lambda`.
pub fn ppp_envelope(
    lambda: f64,
    w: &SimulationWindow,
    radii: &[f64],
    n_envelope: usize,
    kind: EnvelopeKind,
    seed: u64,
) -> Result<Envelope> {
    check_radii(radii, w.side() / 4.0)?;
    simulate_envelope(radii, n_envelope, kind, false, seed, |rng| sample_ppp(lambda, w, rng))
}

/// Envelope over uniform patterns with exactly `n_points` points (CSR
/// conditioned on the observed count).
pub fn binomial_envelope(
    n_points: usize,
    w: &SimulationWindow,
    radii: &[f64],
    n_envelope: usize,
    kind: EnvelopeKind,
    seed: u64,
) -> Result<Envelope> {
    check_radii(radii, w.side() / 4.0)?;
    simulate_envelope(radii, n_envelope, kind, false, seed, |rng| binomial_pattern(n_points, w, rng))
}

fn binomial_pattern<R: Rng + ?Sized>(n: usize, w: &SimulationWindow, rng: &mut R) -> Result<PointPattern> {
    let lambda = n as f64 / w.sampling_area();
    PointPattern::new((0..n).map(|_| w.uniform_point(rng)).collect(), *w, lambda)
}

/// Radii `k·step/√λ_B`, `k = 1..=count`, capped at a quarter of the side.
pub fn default_radii(lambda_b: f64, w: &SimulationWindow, count: usize) -> Vec<f64> {
    let cap = w.side() / 4.0;
    let step = (2.0 / count as f64) / lambda_b.sqrt();
    (1..=count).map(|k| k as f64 * step).filter(|&r| r <= cap).collect()
}

/// Outcome of comparing associated-BS patterns against CSR envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remark2Report {
    pub radii: Vec<f64>,
    /// Exit fraction of each replication.
    pub exit_fractions: Vec<f64>,
    pub mean_exit_fraction: f64,
    pub exit_fraction_se: f64,
    /// Per radius: fraction of replications exiting below / above.
    pub exit_below: Vec<f64>,
    pub exit_above: Vec<f64>,
    /// Mean of K̂ / (envelope median proxy πr²) − 1 across replications.
    pub mean_relative_k: Vec<f64>,
    pub void_fraction: f64,
    /// Nominal pointwise exit probability of the envelope.
    pub nominal_rate: f64,
    /// Void fraction too small for the associated pattern to differ from
    /// the full PPP.
    pub uninformative: bool,
    /// Last replication's estimate, for plotting.
    pub example: KFunctionEstimate,
    pub caveat: String,
}

impl Remark2Report {
    /// Radii where at least `threshold` of replications exit.
    pub fn exit_radii(&self, threshold: f64) -> Vec<f64> {
        self.radii
            .iter()
            .zip(self.exit_below.iter().zip(&self.exit_above))
            .filter(|(_, (b, a))| *b + *a >= threshold)
            .map(|(r, _)| *r)
            .collect()
    }

    /// "regular" if K̂ tends to sit below πr², "clustered" if above.
    pub fn direction(&self) -> &'static str {
        let below: f64 = self.exit_below.iter().sum();
        let above: f64 = self.exit_above.iter().sum();
        if below > above {
            "regular"
        } else if above > below {
            "clustered"
        } else {
            "none"
        }
    }
}

pub const UNINFORMATIVE_VOID_FRACTION: f64 = 0.01;

/// Associate users, keep base stations with users, and test their K̂
/// against count-matched CSR envelopes, once per replication.
pub fn remark2_test(exp: &VoidExperiment, radii: &[f64], n_envelope: usize, kind: EnvelopeKind) -> Result<Remark2Report> {
    exp.validate()?;
    check_radii(radii, exp.window.side() / 4.0)?;
    if !exp.window.is_toroidal() {
        return Err(Error::invalid("window", "K-function envelopes need the toroidal metric"));
    }
    let streams = Streams::new(exp.seed);
    let per_rep = map_replications(exp.reps, |rep| -> Result<(KFunctionEstimate, usize, usize)> {
        let mut rng = streams.rng(STREAM_REMARK2, rep);
        let bs = sample_ppp(exp.lambda_b, &exp.window, &mut rng)?;
        let users = sample_ppp(exp.lambda_u, &exp.window, &mut rng)?;
        let out = associate(&bs, &users, &exp.channel, &exp.law, &mut rng)?;
        let kept = associated_pattern(&out, &bs);
        let k_hat = ripley_k(&kept, radii)?;
        let env = simulate_envelope(radii, n_envelope, kind, true, rng.random(), |r| {
            binomial_pattern(kept.len(), &exp.window, r)
        })?;
        Ok((
            KFunctionEstimate {
                radii: radii.to_vec(),
                k_hat,
                envelope_low: env.low,
                envelope_high: env.high,
                n_envelope,
            },
            out.void_count,
            bs.len(),
        ))
    });
    let per_rep: Vec<_> = per_rep.into_iter().collect::<Result<_>>()?;
    let reps = per_rep.len() as f64;
    let exit_fractions: Vec<f64> = per_rep.iter().map(|(k, _, _)| k.exit_fraction()).collect();
    let (mean, var) = crate::stats::mean_var(&exit_fractions);
    let nr = radii.len();
    let mut below = vec![0.0; nr];
    let mut above = vec![0.0; nr];
    let mut rel = vec![0.0; nr];
    for (k, _, _) in &per_rep {
        for i in 0..nr {
            if k.k_hat[i] < k.envelope_low[i] {
                below[i] += 1.0 / reps;
            } else if k.k_hat[i] > k.envelope_high[i] {
                above[i] += 1.0 / reps;
            }
            rel[i] += (k.k_hat[i] / (std::f64::consts::PI * radii[i] * radii[i]) - 1.0) / reps;
        }
    }
    let voids: usize = per_rep.iter().map(|r| r.1).sum();
    let total: usize = per_rep.iter().map(|r| r.2).sum();
    let void_fraction = voids as f64 / total.max(1) as f64;
    let nominal_rate = match kind {
        EnvelopeKind::MinMax => 2.0 / (n_envelope + 1) as f64,
        EnvelopeKind::Percentile { tail } => {
            2.0 * ((tail * (n_envelope + 1) as f64).round().max(1.0)) / (n_envelope + 1) as f64
        }
    };
    Ok(Remark2Report {
        radii: radii.to_vec(),
        mean_exit_fraction: mean,
        exit_fraction_se: (var / reps).sqrt(),
        exit_fractions,
        exit_below: below,
        exit_above: above,
        mean_relative_k: rel,
        void_fraction,
        nominal_rate,
        uninformative: void_fraction < UNINFORMATIVE_VOID_FRACTION,
        example: per_rep.last().map(|r| r.0.clone()).expect("reps >= 1"),
        caveat: "pointwise envelopes: exit fractions are descriptive, not a simultaneous test".into(),
    })
}
