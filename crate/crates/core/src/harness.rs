//! Experiment configuration, validation, dispatch and result files.
//!
//! A config is a flat TOML table. Every experiment produces one table of
//! rows plus ordered metadata; CSV writes metadata as `# key = value` lines
//! above the header, JSON nests rows and metadata in one object. Output
//! depends only on the config, so identical configs give identical bytes.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{rho_rca, user_count_pmf, void_intensity, void_prob_bounds, void_prob_nearest, void_prob_rca, VORONOI_SHAPE};
use crate::association::{cell_count_pmf_mc, void_probability_mc, VoidExperiment};
use crate::channel::{zeta_dagger, ChannelParams, DbConvention, WeightLaw};
use crate::coverage::{coverage_sweep, CoverageConfig, InterferenceModel, ServingGain};
use crate::error::{Error, Result};
use crate::geometry::{auto_side, SimulationWindow, AUTO_MIN_POINTS};
use crate::par::{map_replications, Streams};
use crate::point_process::{csr_test, sample_mapped_ppp, MarkLaw};
use crate::spatial_stats::{default_radii, remark2_test, EnvelopeKind};
use crate::stats::{mean_var, wilson_trials_for, EstimateWithCI, Z95};

const STREAM_CONSERVATION: u64 = 0x636f_6e73;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    VoidProb,
    CellPmf,
    BoundsCheck,
    ConservationCheck,
    Remark2,
    Coverage,
    Formulas,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::VoidProb,
        Self::CellPmf,
        Self::BoundsCheck,
        Self::ConservationCheck,
        Self::Remark2,
        Self::Coverage,
        Self::Formulas,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Self::VoidProb => "void-prob",
            Self::CellPmf => "cell-pmf",
            Self::BoundsCheck => "bounds-check",
            Self::ConservationCheck => "conservation-check",
            Self::Remark2 => "remark2",
            Self::Coverage => "coverage",
            Self::Formulas => "formulas",
        }
    }

    fn default_ratios(&self) -> Vec<f64> {
        match self {
            Self::Coverage => vec![0.5, 1.0, 2.0, 5.0, 10.0],
            Self::Remark2 => vec![0.5, 20.0],
            _ => vec![0.5, 1.0, 2.0, 4.0, 8.0],
        }
    }

    fn estimates_void(&self) -> bool {
        matches!(self, Self::VoidProb | Self::CellPmf | Self::BoundsCheck)
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (csv, json)"))),
        }
    }
}

/// Window side: sized from the intensities, or fixed in km.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SideRepr", into = "SideRepr")]
pub enum Side {
    #[default]
    Auto,
    Km(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SideRepr {
    Km(f64),
    Word(String),
}

impl TryFrom<SideRepr> for Side {
    type Error = String;

    fn try_from(r: SideRepr) -> std::result::Result<Self, String> {
        match r {
            SideRepr::Km(s) => Ok(Side::Km(s)),
            SideRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Side> for SideRepr {
    fn from(s: Side) -> Self {
        match s {
            Side::Auto => SideRepr::Word("auto".into()),
            Side::Km(k) => SideRepr::Km(k),
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Side::Auto);
        }
        s.parse::<f64>().map(Side::Km).map_err(|_| format!("side must be `auto` or a length in km, got `{s}`"))
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// BS intensity per km². Ignored when `ratio_grid` is set, where
    /// `λ_B = λ_U / ratio`. For conservation-check, the source intensity.
    pub lambda_b: Option<f64>,
    pub lambda_u: f64,
    pub ratio_grid: Option<Vec<f64>>,
    pub alpha: f64,
    pub m: f64,
    pub mu: f64,
    /// Shadowing standard deviation in dB.
    pub sigma_db: Option<f64>,
    /// Shadowing variance in dB.
    pub sigma2_db: Option<f64>,
    /// Shadowing variance of the natural log of the gain.
    pub sigma2_ln: Option<f64>,
    pub law: String,
    pub beta: f64,
    pub beta_grid: Option<Vec<f64>>,
    pub model: Option<String>,
    pub serving_gain: ServingGain,
    pub reps: Option<u64>,
    pub side: Side,
    pub seed: u64,
    /// Target 95% half-width used to size and check replications.
    pub half_width: f64,
    pub n_envelope: usize,
    pub radii_count: usize,
    /// Mark law for conservation-check: `deterministic:T`,
    /// `lognormal:MU,SIG2` or `channel`.
    pub mark: String,
    pub mark_tail: f64,
    pub csr_grid: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::VoidProb,
            lambda_b: None,
            lambda_u: 370.0,
            ratio_grid: None,
            alpha: 4.0,
            m: 1.0,
            mu: 0.0,
            sigma_db: None,
            sigma2_db: None,
            sigma2_ln: None,
            law: "nearest".into(),
            beta: 0.8,
            beta_grid: None,
            model: None,
            serving_gain: ServingGain::Reuse,
            reps: None,
            side: Side::Auto,
            seed: 1,
            half_width: 0.005,
            n_envelope: 199,
            radii_count: 20,
            mark: "lognormal:0,0.25".into(),
            mark_tail: 1e-4,
            csr_grid: 5,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{s}: {}: {}", self.field, self.message)
    }
}

fn diag(severity: Severity, field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic { severity, field: field.into(), message: message.into() }
}

/// One `(λ_B, λ_U)` pair of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub ratio: f64,
    pub lambda_b: f64,
    pub lambda_u: f64,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Shadowing variance in natural-log units and the dB convention it came
    /// from, if any.
    pub fn shadowing(&self) -> Result<(f64, Option<DbConvention>)> {
        match (self.sigma_db, self.sigma2_db, self.sigma2_ln) {
            (None, None, None) => Ok((0.0, None)),
            (Some(v), None, None) => Ok((DbConvention::SigmaInDb.to_sigma2_ln(v), Some(DbConvention::SigmaInDb))),
            (None, Some(v), None) => Ok((DbConvention::Sigma2InDb.to_sigma2_ln(v), Some(DbConvention::Sigma2InDb))),
            (None, None, Some(v)) => Ok((v, None)),
            _ => Err(Error::Config("give at most one of sigma_db, sigma2_db, sigma2_ln".into())),
        }
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        let (s2, _) = self.shadowing()?;
        ChannelParams::new(self.m, self.mu, s2, self.alpha)
    }

    pub fn weight_law(&self) -> Result<WeightLaw> {
        self.law.parse()
    }

    pub fn models(&self) -> Result<Vec<InterferenceModel>> {
        match &self.model {
            None => Ok(InterferenceModel::ALL.to_vec()),
            Some(m) => Ok(vec![m.parse()?]),
        }
    }

    pub fn mark_law(&self) -> Result<MarkLaw> {
        let bad = || Error::Config(format!("mark `{}`: expected deterministic:T, lognormal:MU,SIG2 or channel", self.mark));
        if self.mark == "channel" {
            return Ok(MarkLaw::ChannelTransform { channel: self.channel()?, law: self.weight_law()? });
        }
        let (kind, args) = self.mark.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args.split(',').map(|a| a.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let law = match (kind, nums.as_slice()) {
            ("deterministic", [t]) => MarkLaw::Deterministic { t: *t },
            ("lognormal", [mu, s2]) => MarkLaw::LogNormal { mu: *mu, sigma2: *s2 },
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn operating_points(&self) -> Vec<OperatingPoint> {
        let lu = self.lambda_u;
        match (&self.ratio_grid, self.lambda_b) {
            (Some(grid), _) => grid.iter().map(|&r| OperatingPoint { ratio: r, lambda_b: lu / r, lambda_u: lu }).collect(),
            (None, Some(lb)) => vec![OperatingPoint { ratio: lu / lb, lambda_b: lb, lambda_u: lu }],
            (None, None) => self
                .experiment
                .default_ratios()
                .into_iter()
                .map(|r| OperatingPoint { ratio: r, lambda_b: lu / r, lambda_u: lu })
                .collect(),
        }
    }

    pub fn window_for(&self, lambda_b: f64, lambda_u: f64) -> Result<SimulationWindow> {
        let side = match self.side {
            Side::Auto => auto_side(lambda_b, lambda_u)?,
            Side::Km(s) => s,
        };
        SimulationWindow::toroidal(side)
    }

    fn conservation_lambda(&self) -> f64 {
        self.lambda_b.unwrap_or(100.0)
    }

    /// Replications giving the target half-width on the void probability,
    /// allowing for mild correlation between cells of one replication.
    pub fn suggested_void_reps(&self, pt: &OperatingPoint) -> Result<u64> {
        let cp = self.channel()?;
        let law = self.weight_law()?;
        let p = void_prob_rca(pt.lambda_u, pt.lambda_b, rho_rca(&cp, &law));
        let cells = wilson_trials_for(p, self.half_width, Z95) as f64;
        let w = self.window_for(pt.lambda_b, pt.lambda_u)?;
        let per_rep = pt.lambda_b * w.area();
        Ok(((1.25 * cells / per_rep).ceil() as u64).clamp(10, 1_000_000))
    }

    fn default_reps(&self, pt: &OperatingPoint) -> Result<u64> {
        if let Some(r) = self.reps {
            return Ok(r);
        }
        Ok(match self.experiment {
            ExperimentKind::VoidProb | ExperimentKind::CellPmf | ExperimentKind::BoundsCheck => self.suggested_void_reps(pt)?,
            ExperimentKind::ConservationCheck => 500,
            ExperimentKind::Remark2 => 20,
            ExperimentKind::Coverage => 10_000,
            ExperimentKind::Formulas => 0,
        })
    }

    /// Every problem found, errors first in field order. Running is refused
    /// when any error is present.
    pub fn validate(&self) -> Vec<Diagnostic> {
        use Severity::*;
        let mut d = Vec::new();
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !(self.lambda_u >= 0.0 && self.lambda_u.is_finite()) {
            d.push(diag(Error, "lambda_u", "must be finite and >= 0"));
        }
        if let Some(lb) = self.lambda_b {
            if !positive(lb) && self.ratio_grid.is_none() {
                d.push(diag(Error, "lambda_b", "no base stations"));
            }
        }
        if let Some(g) = &self.ratio_grid {
            if g.is_empty() || g.iter().any(|r| !positive(*r)) {
                d.push(diag(Error, "ratio_grid", "needs positive, finite ratios"));
            } else if self.lambda_u == 0.0 {
                d.push(diag(Error, "lambda_u", "no base stations: a ratio grid with lambda_u = 0 gives lambda_b = 0"));
            }
        } else if self.lambda_b.is_none()
            && self.lambda_u == 0.0
            && self.experiment != ExperimentKind::ConservationCheck
        {
            d.push(diag(Error, "lambda_b", "no base stations"));
        }
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            d.push(diag(Error, "alpha", "path-loss exponent must exceed 2"));
        }
        if !positive(self.m) {
            d.push(diag(Error, "m", "fading parameter must be > 0"));
        }
        if !self.mu.is_finite() {
            d.push(diag(Error, "mu", "must be finite"));
        }
        match self.shadowing() {
            Err(e) => d.push(diag(Error, "sigma", e.to_string())),
            Ok((s2, _)) if !(s2 >= 0.0 && s2.is_finite()) => d.push(diag(Error, "sigma", "shadowing variance must be >= 0")),
            Ok(_) => {}
        }
        let law = match self.weight_law() {
            Ok(l) => Some(l),
            Err(e) => {
                d.push(diag(Error, "law", e.to_string()));
                None
            }
        };
        if let Some(l) = law {
            if l != WeightLaw::Nearest && self.m > 0.0 && self.m <= 2.0 / self.alpha {
                d.push(diag(
                    Warning,
                    "m",
                    format!("ζ† divergent: m ≤ 2/α (m = {}, 2/α = {}); only the lower bound applies", self.m, 2.0 / self.alpha),
                ));
            }
        }
        if !(self.beta > 0.0) {
            d.push(diag(Error, "beta", "SIR threshold must be > 0"));
        }
        if let Some(g) = &self.beta_grid {
            if g.is_empty() || g.iter().any(|b| !(*b > 0.0)) {
                d.push(diag(Error, "beta_grid", "thresholds must be > 0"));
            }
        }
        if let Err(e) = self.models() {
            d.push(diag(Error, "model", e.to_string()));
        }
        if self.reps == Some(0) {
            d.push(diag(Error, "reps", "need at least one replication"));
        }
        if let Side::Km(s) = self.side {
            if !positive(s) {
                d.push(diag(Error, "side", "must be > 0 km or `auto`"));
            }
        }
        if !(self.half_width > 0.0 && self.half_width < 0.5) {
            d.push(diag(Error, "half_width", "must lie in (0, 0.5)"));
        }
        match self.experiment {
            ExperimentKind::Remark2 => {
                if self.n_envelope < 39 {
                    d.push(diag(Error, "n_envelope", "need at least 39 envelope simulations"));
                }
                if self.radii_count == 0 {
                    d.push(diag(Error, "radii_count", "need at least one radius"));
                }
            }
            ExperimentKind::ConservationCheck => {
                if let Err(e) = self.mark_law() {
                    d.push(diag(Error, "mark", e.to_string()));
                }
                if !positive(self.conservation_lambda()) {
                    d.push(diag(Error, "lambda_b", "source intensity must be > 0"));
                }
                if !(self.mark_tail > 0.0 && self.mark_tail < 0.5) {
                    d.push(diag(Error, "mark_tail", "must lie in (0, 0.5)"));
                }
                if self.csr_grid < 2 {
                    d.push(diag(Error, "csr_grid", "need at least a 2x2 grid"));
                }
            }
            ExperimentKind::Coverage if self.lambda_u == 0.0 => {
                d.push(diag(Error, "lambda_u", "coverage sweeps fix lambda_u > 0 and vary lambda_b"));
            }
            _ => {}
        }
        if d.iter().any(|x| x.severity == Error) {
            return d;
        }

        // checks that need a well-formed config
        if self.experiment == ExperimentKind::ConservationCheck {
            return d;
        }
        for pt in self.operating_points() {
            if let Side::Km(s) = self.side {
                let bs = pt.lambda_b * s * s;
                let us = pt.lambda_u * s * s;
                if bs < AUTO_MIN_POINTS || (pt.lambda_u > 0.0 && us < AUTO_MIN_POINTS) {
                    d.push(diag(
                        Warning,
                        "side",
                        format!(
                            "ratio {}: window holds {bs:.0} base stations and {us:.0} users on average (want >= {AUTO_MIN_POINTS})",
                            pt.ratio
                        ),
                    ));
                }
            }
            let Some(reps) = self.reps else { continue };
            let suggested = if self.experiment.estimates_void() {
                self.suggested_void_reps(&pt).ok()
            } else if self.experiment == ExperimentKind::Coverage {
                Some(wilson_trials_for(0.5, self.half_width, Z95))
            } else {
                None
            };
            if let Some(s) = suggested {
                if reps < s {
                    d.push(diag(
                        Warning,
                        "reps",
                        format!(
                            "ratio {}: reps = {reps} too small for half-width {}; suggested reps = {s}",
                            pt.ratio, self.half_width
                        ),
                    ));
                }
            }
        }
        d
    }

    /// Validate, then dispatch to the named experiment.
    pub fn run(&self) -> Result<RunOutput> {
        let diags = self.validate();
        let errors: Vec<String> =
            diags.iter().filter(|x| x.severity == Severity::Error).map(|x| x.to_string()).collect();
        if !errors.is_empty() {
            return Err(Error::Config(errors.join("; ")));
        }
        let mut out = RunOutput::new(self.experiment.label());
        self.echo(&mut out)?;
        for w in diags {
            out.warn(format!("{}: {}", w.field, w.message));
        }
        match self.experiment {
            ExperimentKind::VoidProb => self.run_void(&mut out)?,
            ExperimentKind::CellPmf => self.run_pmf(&mut out)?,
            ExperimentKind::BoundsCheck => self.run_bounds(&mut out)?,
            ExperimentKind::ConservationCheck => self.run_conservation(&mut out)?,
            ExperimentKind::Remark2 => self.run_remark2(&mut out)?,
            ExperimentKind::Coverage => self.run_coverage(&mut out)?,
            ExperimentKind::Formulas => self.run_formulas(&mut out)?,
        }
        Ok(out)
    }

    fn echo(&self, out: &mut RunOutput) -> Result<()> {
        let table: toml::Table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in table.iter().filter(|(k, _)| k.as_str() != "out") {
            out.meta(&format!("config.{k}"), v.to_string());
        }
        let (s2, conv) = self.shadowing()?;
        out.meta("sigma2_ln", s2);
        out.meta("db_convention", conv.map(|c| c.tag()).unwrap_or("none"));
        out.meta("version", env!("CARGO_PKG_VERSION"));
        Ok(())
    }

    fn void_experiment(&self, pt: &OperatingPoint, index: usize) -> Result<VoidExperiment> {
        Ok(VoidExperiment {
            lambda_b: pt.lambda_b,
            lambda_u: pt.lambda_u,
            channel: self.channel()?,
            law: self.weight_law()?,
            reps: self.default_reps(pt)?,
            window: self.window_for(pt.lambda_b, pt.lambda_u)?,
            seed: Streams::new(self.seed).fork(index as u64).seed(),
        })
    }

    fn run_void(&self, out: &mut RunOutput) -> Result<()> {
        out.columns(&[
            "ratio", "lambda_b", "lambda_u", "side", "reps", "p_void", "std_error", "ci_low", "ci_high",
            "p_void_formula", "p_void_nearest", "lower_bound", "upper_bound", "zeta_dagger", "rho", "near_tie_fraction",
        ]);
        for (i, pt) in self.operating_points().iter().enumerate() {
            let exp = self.void_experiment(pt, i)?;
            let v = void_probability_mc(&exp)?;
            v.warnings.iter().for_each(|w| out.warn(format!("ratio {}: {w}", pt.ratio)));
            out.row(vec![
                pt.ratio.into(),
                pt.lambda_b.into(),
                pt.lambda_u.into(),
                exp.window.side().into(),
                exp.reps.into(),
                v.estimate.value.into(),
                v.estimate.std_error.into(),
                v.estimate.ci_low.into(),
                v.estimate.ci_high.into(),
                v.formula.into(),
                void_prob_nearest(pt.lambda_u, pt.lambda_b).into(),
                v.lower.into(),
                v.upper.into(),
                v.zeta_dagger.into(),
                v.rho.into(),
                v.near_tie_fraction.into(),
            ]);
        }
        Ok(())
    }

    fn run_pmf(&self, out: &mut RunOutput) -> Result<()> {
        out.columns(&["ratio", "lambda_b", "lambda_u", "n", "p_hat", "std_error", "ci_low", "ci_high", "pmf_formula"]);
        if self.weight_law()? != WeightLaw::Nearest {
            out.warn("the closed-form user-count pmf describes nearest association".into());
        }
        for (i, pt) in self.operating_points().iter().enumerate() {
            let exp = self.void_experiment(pt, i)?;
            let pmf = cell_count_pmf_mc(&exp)?;
            out.meta(&format!("ratio_{}.mean_users_per_cell", pt.ratio), pmf.mean.value);
            out.meta(&format!("ratio_{}.mean_std_error", pt.ratio), pmf.mean.std_error);
            out.meta(&format!("ratio_{}.reps", pt.ratio), exp.reps);
            for b in &pmf.bins {
                out.row(vec![
                    pt.ratio.into(),
                    pt.lambda_b.into(),
                    pt.lambda_u.into(),
                    (b.n as u64).into(),
                    b.estimate.value.into(),
                    b.estimate.std_error.into(),
                    b.estimate.ci_low.into(),
                    b.estimate.ci_high.into(),
                    user_count_pmf(b.n as u64, pt.lambda_u, pt.lambda_b, VORONOI_SHAPE).into(),
                ]);
            }
        }
        Ok(())
    }

    fn run_bounds(&self, out: &mut RunOutput) -> Result<()> {
        out.columns(&[
            "ratio", "lambda_b", "lambda_u", "reps", "p_void", "std_error", "lower_bound", "p_void_formula", "upper_bound",
            "lower_ok", "upper_ok", "formula_inside",
        ]);
        for (i, pt) in self.operating_points().iter().enumerate() {
            let exp = self.void_experiment(pt, i)?;
            let v = void_probability_mc(&exp)?;
            v.warnings.iter().for_each(|w| out.warn(format!("ratio {}: {w}", pt.ratio)));
            let (p, se) = (v.estimate.value, v.estimate.std_error);
            out.row(vec![
                pt.ratio.into(),
                pt.lambda_b.into(),
                pt.lambda_u.into(),
                exp.reps.into(),
                p.into(),
                se.into(),
                v.lower.into(),
                v.formula.into(),
                v.upper.into(),
                (p + 3.0 * se >= v.lower).into(),
                (p - 3.0 * se <= v.upper).into(),
                (v.lower <= v.formula && v.formula <= v.upper).into(),
            ]);
        }
        Ok(())
    }

    fn run_conservation(&self, out: &mut RunOutput) -> Result<()> {
        out.columns(&[
            "suite", "n_points", "empirical_intensity", "declared_intensity", "csr_statistic", "csr_p_value", "rejected_5pct",
        ]);
        let law = self.mark_law()?;
        let lambda = self.conservation_lambda();
        let target = law.mean_inv_sq() * lambda;
        let w = self.window_for(target, 0.0)?;
        let suites = self.reps.unwrap_or(500);
        let streams = Streams::new(self.seed);
        let rows = map_replications(suites, |i| -> Result<_> {
            let mut rng = streams.rng(STREAM_CONSERVATION, i);
            let p = sample_mapped_ppp(lambda, &law, &w, self.mark_tail, &mut rng)?;
            let csr = csr_test(&p, self.csr_grid)?;
            Ok((p.len(), p.empirical_intensity(), p.intensity_declared(), csr))
        });
        let rows: Vec<_> = rows.into_iter().collect::<Result<_>>()?;
        let mut rejected = 0;
        let mut intensities = Vec::with_capacity(rows.len());
        for (i, (n, emp, declared, csr)) in rows.into_iter().enumerate() {
            let rej = csr.p_value < 0.05;
            rejected += rej as u64;
            intensities.push(emp);
            out.row(vec![
                (i as u64).into(),
                (n as u64).into(),
                emp.into(),
                declared.into(),
                csr.statistic.into(),
                csr.p_value.into(),
                rej.into(),
            ]);
        }
        let rate = EstimateWithCI::from_bernoulli(rejected, suites, suites, self.seed);
        let (mean, var) = mean_var(&intensities);
        let se = (var / suites as f64).sqrt();
        out.meta("mark_law", law.label());
        out.meta("side", w.side());
        out.meta("rejection_rate", rate.value);
        out.meta("rejection_ci_low", rate.ci_low);
        out.meta("rejection_ci_high", rate.ci_high);
        out.meta("mean_empirical_intensity", mean);
        out.meta("intensity_std_error", se);
        out.meta("expected_intensity", target);
        out.meta("intensity_z", if se > 0.0 { (mean - target) / se } else { 0.0 });
        Ok(())
    }

    fn run_remark2(&self, out: &mut RunOutput) -> Result<()> {
        out.columns(&[
            "ratio", "r", "k_hat", "lo", "hi", "pi_r_sq", "exit_below", "exit_above", "mean_relative_k",
        ]);
        for (i, pt) in self.operating_points().iter().enumerate() {
            let exp = self.void_experiment(pt, i)?;
            let radii = default_radii(pt.lambda_b, &exp.window, self.radii_count);
            let rep = remark2_test(&exp, &radii, self.n_envelope, EnvelopeKind::default())?;
            let key = |k: &str| format!("ratio_{}.{k}", pt.ratio);
            out.meta(&key("reps"), exp.reps);
            out.meta(&key("mean_exit_fraction"), rep.mean_exit_fraction);
            out.meta(&key("exit_fraction_std_error"), rep.exit_fraction_se);
            out.meta(&key("nominal_rate"), rep.nominal_rate);
            out.meta(&key("direction"), rep.direction());
            out.meta(&key("void_fraction"), rep.void_fraction);
            out.meta(&key("uninformative"), rep.uninformative);
            if rep.uninformative {
                out.warn(format!("ratio {}: void fraction {:.4} too small, test uninformative", pt.ratio, rep.void_fraction));
            }
            let ex = &rep.example;
            for (j, &r) in radii.iter().enumerate() {
                out.row(vec![
                    pt.ratio.into(),
                    r.into(),
                    ex.k_hat[j].into(),
                    ex.envelope_low[j].into(),
                    ex.envelope_high[j].into(),
                    (std::f64::consts::PI * r * r).into(),
                    rep.exit_below[j].into(),
                    rep.exit_above[j].into(),
                    rep.mean_relative_k[j].into(),
                ]);
            }
            out.meta("caveat", rep.caveat.clone());
        }
        Ok(())
    }

    fn run_coverage(&self, out: &mut RunOutput) -> Result<()> {
        out.columns(&[
            "ratio", "lambda_b", "lambda_u", "side", "model", "beta", "coverage", "std_error", "ci_low", "ci_high", "reps",
            "p_void_formula",
        ]);
        let pts = self.operating_points();
        let ratios: Vec<f64> = pts.iter().map(|p| p.ratio).collect();
        let betas = self.beta_grid.clone().unwrap_or_else(|| vec![self.beta]);
        let base = CoverageConfig {
            beta: self.beta,
            lambda_b: pts[0].lambda_b,
            lambda_u: self.lambda_u,
            channel: self.channel()?,
            law: self.weight_law()?,
            model: InterferenceModel::AllBs,
            reps: self.default_reps(&pts[0])?,
            serving_gain: self.serving_gain,
        };
        let side = match self.side {
            Side::Auto => None,
            Side::Km(s) => Some(s),
        };
        let models = self.models()?;
        for r in coverage_sweep(&base, &ratios, &betas, side, self.seed)? {
            if !models.contains(&r.model) {
                continue;
            }
            out.row(vec![
                r.ratio.into(),
                r.lambda_b.into(),
                r.lambda_u.into(),
                r.side.into(),
                r.model.label().into(),
                r.beta.into(),
                r.estimate.value.into(),
                r.estimate.std_error.into(),
                r.estimate.ci_low.into(),
                r.estimate.ci_high.into(),
                r.estimate.reps.into(),
                r.p_void_formula.into(),
            ]);
        }
        Ok(())
    }

    fn run_formulas(&self, out: &mut RunOutput) -> Result<()> {
        out.columns(&[
            "ratio", "lambda_b", "lambda_u", "zeta_dagger", "rho", "p_void_formula", "p_void_nearest", "lower_bound",
            "upper_bound", "divergent", "void_bs_intensity",
        ]);
        let cp = self.channel()?;
        let law = self.weight_law()?;
        let z = zeta_dagger(&cp, &law);
        let rho = rho_rca(&cp, &law);
        for pt in self.operating_points() {
            let b = void_prob_bounds(pt.lambda_u, pt.lambda_b, z);
            let p = void_prob_rca(pt.lambda_u, pt.lambda_b, rho);
            out.row(vec![
                pt.ratio.into(),
                pt.lambda_b.into(),
                pt.lambda_u.into(),
                z.into(),
                rho.into(),
                p.into(),
                void_prob_nearest(pt.lambda_u, pt.lambda_b).into(),
                b.lower.into(),
                b.upper.into(),
                b.divergent.into(),
                void_intensity(pt.lambda_b, p).into(),
            ]);
        }
        Ok(())
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Float(x) => write!(f, "{x}"),
            Cell::Int(x) => write!(f, "{x}"),
            Cell::Bool(x) => write!(f, "{x}"),
            Cell::Text(x) => write!(f, "{x}"),
        }
    }
}

impl Cell {
    fn to_json(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or_else(|| Value::String(x.to_string())),
            Cell::Int(x) => Value::from(*x),
            Cell::Bool(x) => Value::Bool(*x),
            Cell::Text(x) => Value::String(x.clone()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(x) => Some(*x as f64),
            _ => None,
        }
    }
}

/// Result table of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered `(key, value)` pairs.
    pub metadata: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), ..Default::default() }
    }

    fn columns(&mut self, cols: &[&str]) {
        self.columns = cols.iter().map(|c| c.to_string()).collect();
    }

    fn row(&mut self, r: Vec<Cell>) {
        debug_assert_eq!(r.len(), self.columns.len());
        self.rows.push(r);
    }

    fn meta(&mut self, key: &str, value: impl fmt::Display) {
        self.metadata.push((key.into(), value.to_string()));
    }

    fn warn(&mut self, w: String) {
        self.warnings.push(w);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# experiment = {}", self.experiment)?;
        for (k, v) in &self.metadata {
            writeln!(w, "# {k} = {}", v.replace('\n', " "))?;
        }
        for warning in &self.warnings {
            writeln!(w, "# warning = {}", warning.replace('\n', " "))?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut meta = serde_json::Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> =
                    self.columns.iter().cloned().zip(r.iter().map(Cell::to_json)).collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::json!({
            "experiment": self.experiment,
            "columns": self.columns,
            "rows": rows,
            "metadata": meta,
            "warnings": self.warnings,
        })
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.to_json())?;
        writeln!(w)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: OutputFormat, w: W) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
    }

    pub fn write_to_path(&self, format: OutputFormat, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(format, f)
    }
}
