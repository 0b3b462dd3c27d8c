//! Random cell association.
//!
//! Every user joins the base station maximising `W_i · H_{i,u} · d(u, B_i)^{-α}`.
//! Link gains are i.i.d. per user–BS pair; weights are drawn once per base
//! station, except under [`WeightLaw::Nearest`] where `W = 1/H` cancels the
//! link gain and the rule reduces to smallest distance. Ties go to the lowest
//! base-station index.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{rho_rca, user_count_pmf, void_prob_bounds, void_prob_rca, VORONOI_SHAPE};
use crate::channel::{zeta_dagger, ChannelParams, GainSampler, WeightLaw};
use crate::error::{Error, Result};
use crate::geometry::{Point2, SimulationWindow};
use crate::par::{map_replications, Streams};
use crate::point_process::{sample_ppp, PointPattern};
use crate::stats::EstimateWithCI;

/// Users whose best and runner-up criteria are within this factor count as
/// near ties.
pub const NEAR_TIE_FACTOR: f64 = 1.01;

const STREAM_VOID: u64 = 0x766f_6964;

/// A base station with its association marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedBasestation {
    pub position: Point2,
    /// W_i; 1 for the unit law and per-link 1/H for the nearest law (NaN).
    pub weight: f64,
    /// Link gains of the associated users, in roster order.
    pub assoc_gains: Vec<f64>,
    pub void: bool,
    pub users: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationOutcome {
    /// Serving base station of each user.
    pub assignments: Vec<usize>,
    pub serving_distance: Vec<f64>,
    /// H on each user's serving link, as drawn during association.
    pub serving_gain: Vec<f64>,
    /// ln(W·H) on the serving link (0 under the nearest law).
    pub serving_ln_wh: Vec<f64>,
    pub cell_counts: Vec<usize>,
    pub void_count: usize,
    /// Per-BS weights W_i (NaN under the nearest law).
    pub weights: Vec<f64>,
    /// Users whose two best candidates were within [`NEAR_TIE_FACTOR`].
    pub near_ties: usize,
    pub alpha: f64,
}

impl AssociationOutcome {
    pub fn user_count(&self) -> usize {
        self.assignments.len()
    }

    /// Serving distance seen through the map `B ↦ (WH)^{-1/α} B`, under which
    /// weighted association becomes nearest association.
    pub fn transformed_serving_distance(&self, user: usize) -> f64 {
        self.serving_distance[user] * (-self.serving_ln_wh[user] / self.alpha).exp()
    }

    /// Per-BS rosters.
    pub fn rosters(&self) -> Vec<Vec<usize>> {
        let mut r: Vec<Vec<usize>> = self.cell_counts.iter().map(|&c| Vec::with_capacity(c)).collect();
        for (u, &b) in self.assignments.iter().enumerate() {
            r[b].push(u);
        }
        r
    }

    pub fn basestations(&self, bs: &PointPattern) -> Vec<MarkedBasestation> {
        self.rosters()
            .into_iter()
            .enumerate()
            .map(|(i, users)| MarkedBasestation {
                position: bs.points()[i],
                weight: self.weights[i],
                assoc_gains: users.iter().map(|&u| self.serving_gain[u]).collect(),
                void: users.is_empty(),
                users,
            })
            .collect()
    }

    pub fn write_users_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "user_id,bs_id,serving_distance")?;
        for (u, (&b, d)) in self.assignments.iter().zip(&self.serving_distance).enumerate() {
            writeln!(out, "{u},{b},{d}")?;
        }
        Ok(())
    }

    pub fn write_bs_csv<W: Write>(&self, bs: &PointPattern, mut out: W) -> Result<()> {
        writeln!(out, "bs_id,x,y,count,void_flag")?;
        for (i, (p, &c)) in bs.points().iter().zip(&self.cell_counts).enumerate() {
            writeln!(out, "{i},{},{},{c},{}", p.x, p.y, u8::from(c == 0))?;
        }
        Ok(())
    }
}

/// Uniform bucket grid over base stations for nearest-point queries.
pub(crate) struct GridIndex<'a> {
    points: &'a [Point2],
    window: SimulationWindow,
    cells: usize,
    width: f64,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    pub(crate) fn new(points: &'a [Point2], window: SimulationWindow) -> Self {
        let cells = ((points.len() as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 1024);
        let width = window.side() / cells as f64;
        let cell_of = |p: &Point2| {
            let i = ((p.x / width) as usize).min(cells - 1);
            let j = ((p.y / width) as usize).min(cells - 1);
            i * cells + j
        };
        let mut start = vec![0usize; cells * cells + 1];
        for p in points {
            start[cell_of(p) + 1] += 1;
        }
        for k in 1..start.len() {
            start[k] += start[k - 1];
        }
        let mut fill = start.clone();
        let mut items = vec![0usize; points.len()];
        for (idx, p) in points.iter().enumerate() {
            let c = cell_of(p);
            items[fill[c]] = idx;
            fill[c] += 1;
        }
        Self { points, window, cells, width, start, items }
    }

    /// Nearest and runner-up as `(squared distance, index)`, ties by index.
    pub(crate) fn two_nearest(&self, q: Point2) -> ((f64, usize), Option<(f64, usize)>) {
        let g = self.cells as isize;
        let ci = ((q.x / self.width) as isize).clamp(0, g - 1);
        let cj = ((q.y / self.width) as isize).clamp(0, g - 1);
        let toroidal = self.window.is_toroidal();
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second: (f64, usize) = (f64::INFINITY, usize::MAX);
        let consider = |idx: usize, best: &mut (f64, usize), second: &mut (f64, usize)| {
            let d2 = self.window.distance_sq(q, self.points[idx]);
            let cand = (d2, idx);
            if idx == best.1 || idx == second.1 {
                return;
            }
            if lex_less(cand, *best) {
                *second = *best;
                *best = cand;
            } else if lex_less(cand, *second) {
                *second = cand;
            }
        };
        let mut k: isize = 0;
        loop {
            let visit = |di: isize, dj: isize, best: &mut (f64, usize), second: &mut (f64, usize)| {
                let (mut i, mut j) = (ci + di, cj + dj);
                if toroidal {
                    i = i.rem_euclid(g);
                    j = j.rem_euclid(g);
                } else if i < 0 || j < 0 || i >= g || j >= g {
                    return;
                }
                let c = (i * g + j) as usize;
                for &idx in &self.items[self.start[c]..self.start[c + 1]] {
                    consider(idx, best, second);
                }
            };
            if k == 0 {
                visit(0, 0, &mut best, &mut second);
            } else {
                for d in -k..=k {
                    visit(-k, d, &mut best, &mut second);
                    visit(k, d, &mut best, &mut second);
                }
                for d in (-k + 1)..k {
                    visit(d, -k, &mut best, &mut second);
                    visit(d, k, &mut best, &mut second);
                }
            }
            // every unvisited point is at least k·width away
            let reach = k as f64 * self.width;
            let covered = if toroidal { 2 * k + 1 >= g } else { k >= g };
            if covered || second.0 <= reach * reach {
                break;
            }
            k += 1;
        }
        (best, (second.1 != usize::MAX).then_some(second))
    }
}

#[inline]
fn lex_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[inline]
pub(crate) fn path_loss(d2: f64, alpha: f64) -> f64 {
    // d^{-α} from d²
    if alpha == 4.0 {
        1.0 / (d2 * d2)
    } else {
        d2.powf(-0.5 * alpha)
    }
}

/// Associate every user with a base station.
pub fn associate<R: Rng + ?Sized>(
    bs: &PointPattern,
    users: &PointPattern,
    cp: &ChannelParams,
    law: &WeightLaw,
    rng: &mut R,
) -> Result<AssociationOutcome> {
    if bs.is_empty() {
        return Err(Error::NoBaseStations);
    }
    cp.validate()?;
    law.validate()?;
    let w = *bs.window();
    let n_bs = bs.len();
    let n_users = users.len();
    let gains = GainSampler::new(cp);
    let mut out = AssociationOutcome {
        assignments: Vec::with_capacity(n_users),
        serving_distance: Vec::with_capacity(n_users),
        serving_gain: Vec::with_capacity(n_users),
        serving_ln_wh: Vec::with_capacity(n_users),
        cell_counts: vec![0; n_bs],
        void_count: 0,
        weights: Vec::new(),
        near_ties: 0,
        alpha: cp.alpha,
    };

    match law {
        WeightLaw::Nearest => {
            out.weights = vec![f64::NAN; n_bs];
            let index = GridIndex::new(bs.points(), w);
            let tie = NEAR_TIE_FACTOR.powf(2.0 / cp.alpha);
            for u in users.points() {
                let (best, second) = index.two_nearest(*u);
                if let Some(s) = second {
                    if s.0 < best.0 * tie {
                        out.near_ties += 1;
                    }
                }
                out.assignments.push(best.1);
                out.serving_distance.push(best.0.sqrt());
                out.serving_gain.push(gains.sample(rng));
                out.serving_ln_wh.push(0.0);
            }
        }
        WeightLaw::Unit | WeightLaw::LogNormal { .. } => {
            out.weights = (0..n_bs).map(|_| law.sample_ln_weight(rng).exp()).collect();
            let pts = bs.points();
            for u in users.points() {
                let mut best = (f64::NEG_INFINITY, usize::MAX, 0.0f64);
                let mut second = f64::NEG_INFINITY;
                for (i, (b, &wi)) in pts.iter().zip(&out.weights).enumerate() {
                    let h = gains.sample(rng);
                    let crit = wi * h * path_loss(w.distance_sq(*u, *b), cp.alpha);
                    if crit > best.0 {
                        second = best.0;
                        best = (crit, i, h);
                    } else if crit > second {
                        second = crit;
                    }
                }
                if second * NEAR_TIE_FACTOR > best.0 {
                    out.near_ties += 1;
                }
                let (_, i, h) = best;
                out.assignments.push(i);
                out.serving_distance.push(w.distance(*u, pts[i]));
                out.serving_gain.push(h);
                out.serving_ln_wh.push((out.weights[i] * h).ln());
            }
        }
    }
    for &b in &out.assignments {
        out.cell_counts[b] += 1;
    }
    out.void_count = out.cell_counts.iter().filter(|&&c| c == 0).count();
    Ok(out)
}

/// Sub-pattern of base stations with at least one user, declared at
/// intensity `(1 - p̂_∅)·λ_B` with `p̂_∅` the realised void fraction.
pub fn associated_pattern(outcome: &AssociationOutcome, bs: &PointPattern) -> PointPattern {
    let kept: Vec<Point2> = bs
        .points()
        .iter()
        .zip(&outcome.cell_counts)
        .filter(|(_, &c)| c > 0)
        .map(|(p, _)| *p)
        .collect();
    let frac = if bs.is_empty() { 0.0 } else { kept.len() as f64 / bs.len() as f64 };
    bs.with_points(kept, frac * bs.intensity_declared())
}

/// Inputs shared by the void-cell experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoidExperiment {
    pub lambda_b: f64,
    pub lambda_u: f64,
    pub channel: ChannelParams,
    pub law: WeightLaw,
    pub reps: u64,
    pub window: SimulationWindow,
    pub seed: u64,
}

impl VoidExperiment {
    pub fn validate(&self) -> Result<()> {
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
}

/// Per-replication tallies.
#[derive(Debug, Clone, PartialEq, Default)]
struct RepTally {
    observed: u64,
    /// histogram of users per observed cell
    hist: Vec<u64>,
    users: u64,
    near_ties: u64,
}

fn run_tallies(exp: &VoidExperiment) -> Result<Vec<RepTally>> {
    exp.validate()?;
    let streams = Streams::new(exp.seed);
    let results = map_replications(exp.reps, |rep| -> Result<RepTally> {
        let mut rng = streams.rng(STREAM_VOID, rep);
        let bs = sample_ppp(exp.lambda_b, &exp.window, &mut rng)?;
        if bs.is_empty() {
            return Ok(RepTally::default());
        }
        let users = sample_ppp(exp.lambda_u, &exp.window, &mut rng)?;
        let out = associate(&bs, &users, &exp.channel, &exp.law, &mut rng)?;
        let mut t = RepTally { users: users.len() as u64, near_ties: out.near_ties as u64, ..Default::default() };
        for (p, &c) in bs.points().iter().zip(&out.cell_counts) {
            if !exp.window.in_observation(*p) {
                continue;
            }
            if t.hist.len() <= c {
                t.hist.resize(c + 1, 0);
            }
            t.hist[c] += 1;
            t.observed += 1;
        }
        Ok(t)
    });
    results.into_iter().collect()
}

/// Simulated void probability with the matching closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoidEstimate {
    pub estimate: EstimateWithCI,
    pub zeta_dagger: f64,
    pub rho: f64,
    /// (1 + λ_U/(ρλ_B))^{-ρ}
    pub formula: f64,
    pub lower: f64,
    pub upper: f64,
    /// Fraction of users whose best two candidates were near-tied.
    pub near_tie_fraction: f64,
    pub warnings: Vec<String>,
}

fn formula_side(exp: &VoidExperiment) -> (f64, f64, f64, f64, f64, Vec<String>) {
    let z = zeta_dagger(&exp.channel, &exp.law);
    let rho = rho_rca(&exp.channel, &exp.law);
    let b = void_prob_bounds(exp.lambda_u, exp.lambda_b, z);
    let mut warnings = Vec::new();
    if b.divergent {
        warnings.push(format!(
            "zeta-dagger divergent (m = {} <= 2/alpha = {}): only the lower bound applies",
            exp.channel.m,
            2.0 / exp.channel.alpha
        ));
    }
    (z, rho, void_prob_rca(exp.lambda_u, exp.lambda_b, rho), b.lower, b.upper, warnings)
}

/// Fraction of (base station, replication) pairs with an empty roster.
pub fn void_probability_mc(exp: &VoidExperiment) -> Result<VoidEstimate> {
    let tallies = run_tallies(exp)?;
    Ok(void_from_tallies(exp, &tallies))
}

fn void_from_tallies(exp: &VoidExperiment, tallies: &[RepTally]) -> VoidEstimate {
    let clusters: Vec<(u64, u64)> = tallies
        .iter()
        .map(|t| (t.hist.first().copied().unwrap_or(0), t.observed))
        .collect();
    let estimate = EstimateWithCI::from_clusters(&clusters, exp.seed);
    let users: u64 = tallies.iter().map(|t| t.users).sum();
    let ties: u64 = tallies.iter().map(|t| t.near_ties).sum();
    let (zeta_dagger, rho, formula, lower, upper, warnings) = formula_side(exp);
    VoidEstimate {
        estimate,
        zeta_dagger,
        rho,
        formula,
        lower,
        upper,
        near_tie_fraction: if users > 0 { ties as f64 / users as f64 } else { 0.0 },
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfBin {
    pub n: usize,
    pub estimate: EstimateWithCI,
    /// Gamma-area pmf with shape 7/2; only meaningful for nearest association.
    pub formula: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCountPmf {
    pub bins: Vec<PmfBin>,
    /// Mean users per cell.
    pub mean: EstimateWithCI,
    pub void: VoidEstimate,
}

/// Empirical distribution of users per cell. Bin 0 is the void estimate of
/// the same run.
pub fn cell_count_pmf_mc(exp: &VoidExperiment) -> Result<CellCountPmf> {
    let tallies = run_tallies(exp)?;
    let void = void_from_tallies(exp, &tallies);
    let max_n = tallies.iter().map(|t| t.hist.len()).max().unwrap_or(1);
    let bins = (0..max_n)
        .map(|n| {
            let clusters: Vec<(u64, u64)> =
                tallies.iter().map(|t| (t.hist.get(n).copied().unwrap_or(0), t.observed)).collect();
            PmfBin {
                n,
                estimate: EstimateWithCI::from_clusters(&clusters, exp.seed),
                formula: user_count_pmf(n as u64, exp.lambda_u, exp.lambda_b, VORONOI_SHAPE),
            }
        })
        .collect();
    // mean users per cell as a ratio estimator over replications
    let per_rep: Vec<(f64, f64)> = tallies
        .iter()
        .map(|t| (t.hist.iter().enumerate().map(|(n, &c)| (n as u64 * c) as f64).sum(), t.observed as f64))
        .collect();
    let tot_users: f64 = per_rep.iter().map(|r| r.0).sum();
    let tot_cells: f64 = per_rep.iter().map(|r| r.1).sum();
    let mean = tot_users / tot_cells;
    let r = per_rep.len() as f64;
    let se = if per_rep.len() > 1 {
        (r / (r - 1.0) * per_rep.iter().map(|(u, c)| (u - mean * c).powi(2)).sum::<f64>()).sqrt() / tot_cells
    } else {
        0.0
    };
    let mean = EstimateWithCI {
        value: mean,
        std_error: se,
        ci_low: mean - crate::stats::Z95 * se,
        ci_high: mean + crate::stats::Z95 * se,
        reps: exp.reps,
        seed: exp.seed,
    };
    Ok(CellCountPmf { bins, mean, void })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::void_prob_nearest;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn torus(side: f64) -> SimulationWindow {
        SimulationWindow::toroidal(side).unwrap()
    }

    fn rayleigh() -> ChannelParams {
        ChannelParams::rayleigh(4.0)
    }

    #[test]
    fn empty_bs_rejected() {
        let w = torus(1.0);
        let users = sample_ppp(10.0, &w, &mut rng(0)).unwrap();
        let r = associate(&PointPattern::empty(w), &users, &rayleigh(), &WeightLaw::Nearest, &mut rng(0));
        assert!(matches!(r, Err(Error::NoBaseStations)));
    }

    #[test]
    fn single_bs_takes_everyone() {
        let w = torus(1.0);
        let bs = PointPattern::new(vec![Point2::new(0.3, 0.3)], w, 1.0).unwrap();
        let users = sample_ppp(100.0, &w, &mut rng(1)).unwrap();
        for law in [WeightLaw::Nearest, WeightLaw::Unit] {
            let out = associate(&bs, &users, &rayleigh(), &law, &mut rng(1)).unwrap();
            assert_eq!(out.void_count, 0);
            assert_eq!(out.cell_counts, vec![users.len()]);
        }
    }

    #[test]
    fn nearest_picks_closer_bs() {
        let w = torus(10.0);
        let bs = PointPattern::new(vec![Point2::new(2.5, 5.0), Point2::new(7.5, 5.0)], w, 0.02).unwrap();
        let users = PointPattern::new(vec![Point2::new(4.0, 5.0)], w, 0.01).unwrap();
        let out = associate(&bs, &users, &rayleigh(), &WeightLaw::Nearest, &mut rng(2)).unwrap();
        assert_eq!(out.assignments, vec![0]);
        assert_eq!(out.void_count, 1);
        // exact tie goes to the lower index
        let users = PointPattern::new(vec![Point2::new(5.0, 5.0)], w, 0.01).unwrap();
        let out = associate(&bs, &users, &rayleigh(), &WeightLaw::Nearest, &mut rng(2)).unwrap();
        assert_eq!(out.assignments, vec![0]);
        assert_eq!(out.near_ties, 1);
    }

    #[test]
    fn grid_matches_brute_force() {
        for (side, lb, metric_guard) in [(1.0, 300.0, false), (2.0, 40.0, true), (1.0, 3.0, false)] {
            let w = if metric_guard { SimulationWindow::with_guard(side, 0.1).unwrap() } else { torus(side) };
            let mut r = rng(3);
            let bs = sample_ppp(lb, &w, &mut r).unwrap();
            if bs.len() < 2 {
                continue;
            }
            let index = GridIndex::new(bs.points(), w);
            for _ in 0..2000 {
                let q = w.uniform_point(&mut r);
                let mut all: Vec<(f64, usize)> =
                    bs.points().iter().enumerate().map(|(i, p)| (w.distance_sq(q, *p), i)).collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let (best, second) = index.two_nearest(q);
                assert_eq!(best, all[0]);
                assert_eq!(second, Some(all[1]));
            }
        }
    }

    #[test]
    fn nearest_ignores_gains() {
        let w = torus(1.0);
        let mut r = rng(4);
        let bs = sample_ppp(200.0, &w, &mut r).unwrap();
        let users = sample_ppp(400.0, &w, &mut r).unwrap();
        let a = associate(&bs, &users, &rayleigh(), &WeightLaw::Nearest, &mut rng(5)).unwrap();
        let b = associate(&bs, &users, &rayleigh(), &WeightLaw::Nearest, &mut rng(6)).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_ne!(a.serving_gain, b.serving_gain);
    }

    #[test]
    fn common_weight_scale_leaves_assignments() {
        let w = torus(1.0);
        let mut r = rng(7);
        let bs = sample_ppp(100.0, &w, &mut r).unwrap();
        let users = sample_ppp(200.0, &w, &mut r).unwrap();
        let cp = ChannelParams::new(1.0, 0.0, 1.0, 4.0).unwrap();
        let a = associate(&bs, &users, &cp, &WeightLaw::LogNormal { mu: 0.0, sigma2: 0.5 }, &mut rng(8)).unwrap();
        let b = associate(&bs, &users, &cp, &WeightLaw::LogNormal { mu: 3.7, sigma2: 0.5 }, &mut rng(8)).unwrap();
        assert_eq!(a.assignments, b.assignments);
        // shifting the shadowing mean scales every gain alike
        let cp2 = ChannelParams::new(1.0, -2.0, 1.0, 4.0).unwrap();
        let c = associate(&bs, &users, &cp2, &WeightLaw::Unit, &mut rng(9)).unwrap();
        let d = associate(&bs, &users, &cp, &WeightLaw::Unit, &mut rng(9)).unwrap();
        assert_eq!(c.assignments, d.assignments);
    }

    #[test]
    fn outcome_invariants() {
        let w = torus(1.0);
        let mut r = rng(10);
        let bs = sample_ppp(150.0, &w, &mut r).unwrap();
        let users = sample_ppp(150.0, &w, &mut r).unwrap();
        for law in [WeightLaw::Nearest, WeightLaw::Unit] {
            let out = associate(&bs, &users, &rayleigh(), &law, &mut r).unwrap();
            assert_eq!(out.cell_counts.iter().sum::<usize>(), users.len());
            assert_eq!(out.void_count, out.cell_counts.iter().filter(|&&c| c == 0).count());
            let marked = out.basestations(&bs);
            let mut seen = vec![false; users.len()];
            for m in &marked {
                assert_eq!(m.void, m.users.is_empty());
                assert_eq!(m.assoc_gains.len(), m.users.len());
                for &u in &m.users {
                    assert!(!seen[u]);
                    seen[u] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
            let kept = associated_pattern(&out, &bs);
            assert_eq!(kept.len(), bs.len() - out.void_count);
        }
    }

    #[test]
    fn associated_pattern_is_identity_without_voids() {
        let w = torus(1.0);
        let bs = PointPattern::new(vec![Point2::new(0.2, 0.2), Point2::new(0.7, 0.7)], w, 2.0).unwrap();
        let users = PointPattern::new(vec![Point2::new(0.25, 0.2), Point2::new(0.7, 0.75)], w, 2.0).unwrap();
        let out = associate(&bs, &users, &rayleigh(), &WeightLaw::Nearest, &mut rng(0)).unwrap();
        let kept = associated_pattern(&out, &bs);
        assert_eq!(kept.points(), bs.points());
        assert_eq!(kept.intensity_declared(), 2.0);
    }

    #[test]
    fn csv_outputs() {
        let w = torus(1.0);
        let bs = PointPattern::new(vec![Point2::new(0.2, 0.2), Point2::new(0.7, 0.7)], w, 2.0).unwrap();
        let users = PointPattern::new(vec![Point2::new(0.25, 0.2)], w, 1.0).unwrap();
        let out = associate(&bs, &users, &rayleigh(), &WeightLaw::Nearest, &mut rng(0)).unwrap();
        let mut buf = Vec::new();
        out.write_users_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(&row[..2], &["0", "0"]);
        approx::assert_abs_diff_eq!(row[2].parse::<f64>().unwrap(), 0.05, epsilon = 1e-12);
        let mut buf = Vec::new();
        out.write_bs_csv(&bs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bs_id,x,y,count,void_flag\n0,0.2,0.2,1,0\n1,0.7,0.7,0,1\n");
    }

    fn exp(lambda_u: f64, reps: u64) -> VoidExperiment {
        VoidExperiment {
            lambda_b: 100.0,
            lambda_u,
            channel: rayleigh(),
            law: WeightLaw::Nearest,
            reps,
            window: torus(2.5),
            seed: 17,
        }
    }

    #[test]
    fn no_users_means_all_void() {
        let e = void_probability_mc(&exp(0.0, 5)).unwrap();
        assert_eq!(e.estimate.value, 1.0);
        let pmf = cell_count_pmf_mc(&exp(0.0, 5)).unwrap();
        assert_eq!(pmf.bins.len(), 1);
        assert_eq!(pmf.bins[0].estimate.value, 1.0);
    }

    #[test]
    fn void_fraction_near_formula() {
        let e = void_probability_mc(&exp(200.0, 200)).unwrap();
        let target = void_prob_nearest(200.0, 100.0);
        assert!(e.estimate.within_se(target, 3.0), "{:?} vs {target}", e.estimate);
        assert!(e.warnings.is_empty());
    }

    #[test]
    fn pmf_bin_zero_equals_void_and_mean_is_ratio() {
        let pmf = cell_count_pmf_mc(&exp(100.0, 200)).unwrap();
        let v = void_probability_mc(&exp(100.0, 200)).unwrap();
        assert_eq!(pmf.bins[0].estimate, v.estimate);
        assert!(pmf.mean.within_se(1.0, 3.0), "{:?}", pmf.mean);
        let total: f64 = pmf.bins.iter().map(|b| b.estimate.value).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_experiment() {
        let mut e = exp(1.0, 1);
        e.lambda_b = 0.0;
        assert!(void_probability_mc(&e).is_err());
        let mut e = exp(1.0, 0);
        e.reps = 0;
        assert!(void_probability_mc(&e).is_err());
    }

    #[test]
    fn divergent_zeta_warns() {
        let mut e = exp(100.0, 2);
        e.channel = ChannelParams::new(0.4, 0.0, 0.0, 4.0).unwrap();
        e.law = WeightLaw::Unit;
        e.window = torus(1.0);
        let v = void_probability_mc(&e).unwrap();
        assert_eq!(v.warnings.len(), 1);
        assert_eq!(v.upper, v.lower);
    }
}
