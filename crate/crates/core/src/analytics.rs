//! Closed-form void-cell results.
//!
//! Cell areas are modelled as Gamma(ζ, 1/(ζλ_B)) with ζ = 7/2 for Voronoi
//! cells. Mixing the Poisson user count over that area law gives a negative
//! binomial pmf whose zero term is the void probability. For weighted
//! association the shape is replaced by ρ = (7/2)·ζ†.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::channel::{zeta_dagger, ChannelParams, WeightLaw};
use crate::error::{Error, Result};

/// Gamma shape fitted to Poisson–Voronoi cell areas.
pub const VORONOI_SHAPE: f64 = 3.5;

/// Parameters of the void-probability formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoidFormulaInputs {
    pub lambda_u: f64,
    pub lambda_b: f64,
    pub rho: f64,
    pub zeta_dagger: f64,
}

impl VoidFormulaInputs {
    pub fn new(lambda_u: f64, lambda_b: f64, cp: &ChannelParams, law: &WeightLaw) -> Self {
        let z = zeta_dagger(cp, law);
        Self { lambda_u, lambda_b, rho: VORONOI_SHAPE * z, zeta_dagger: z }
    }

    pub fn is_consistent(&self) -> bool {
        if self.zeta_dagger.is_infinite() {
            return self.rho.is_infinite();
        }
        (self.rho - VORONOI_SHAPE * self.zeta_dagger).abs() <= 1e-12 * self.rho.abs().max(1.0)
    }

    pub fn ratio(&self) -> f64 {
        self.lambda_u / self.lambda_b
    }

    pub fn bounds(&self) -> VoidBounds {
        void_prob_bounds(self.lambda_u, self.lambda_b, self.zeta_dagger)
    }

    pub fn void_prob(&self) -> f64 {
        void_prob_rca(self.lambda_u, self.lambda_b, self.rho)
    }
}

/// Gamma approximation to the density of a cell area.
pub fn cell_area_pdf(x: f64, lambda_b: f64, zeta: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", format!("area must be > 0, got {x}")));
    }
    if !(lambda_b > 0.0) || !(zeta > 0.0) {
        return Err(Error::invalid("lambda_b/zeta", "must be > 0"));
    }
    let rate = zeta * lambda_b;
    Ok((zeta * (rate * x).ln() - rate * x - ln_gamma(zeta) - x.ln()).exp())
}

/// P[n users in a cell] under the gamma area law with shape `zeta`.
pub fn user_count_pmf(n: u64, lambda_u: f64, lambda_b: f64, zeta: f64) -> f64 {
    if lambda_u == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    let zb = zeta * lambda_b;
    let ln_p = ln_gamma(nf + zeta) - ln_gamma(zeta) - ln_gamma(nf + 1.0) + nf * lambda_u.ln() + zeta * zb.ln()
        - (nf + zeta) * (zb + lambda_u).ln();
    ln_p.exp()
}

/// Void probability of a Voronoi cell (nearest association).
pub fn void_prob_nearest(lambda_u: f64, lambda_b: f64) -> f64 {
    void_prob_rca(lambda_u, lambda_b, VORONOI_SHAPE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoidBounds {
    pub lower: f64,
    pub upper: f64,
    /// ζ† was infinite; `upper` collapsed onto `lower`.
    pub divergent: bool,
}

/// Lower bound e^{-λ_U/λ_B} and upper bound (1 + λ_U/(ζ†λ_B))^{-ζ†}.
pub fn void_prob_bounds(lambda_u: f64, lambda_b: f64, zeta_dagger: f64) -> VoidBounds {
    let lower = (-lambda_u / lambda_b).exp();
    if !zeta_dagger.is_finite() {
        return VoidBounds { lower, upper: lower, divergent: true };
    }
    VoidBounds { lower, upper: void_prob_rca(lambda_u, lambda_b, zeta_dagger), divergent: false }
}

/// (1 + λ_U/(ρλ_B))^{-ρ}; the ρ → ∞ limit is e^{-λ_U/λ_B}.
pub fn void_prob_rca(lambda_u: f64, lambda_b: f64, rho: f64) -> f64 {
    let x = lambda_u / lambda_b;
    if rho.is_infinite() {
        return (-x).exp();
    }
    (-rho * (x / rho).ln_1p()).exp()
}

/// ρ for strongest-received-power association (unit weights), +∞ when
/// m ≤ 2/α.
pub fn rho_strongest_power(m: f64, sigma2: f64, alpha: f64) -> f64 {
    let p = 2.0 / alpha;
    if m <= p {
        return f64::INFINITY;
    }
    let ln_ratio = ln_gamma(m + p) + ln_gamma(m - p) - 2.0 * ln_gamma(m);
    3.5 * (ln_ratio + 4.0 * sigma2 / (alpha * alpha)).exp()
}

/// ρ = (7/2)·ζ† for any weight law.
pub fn rho_rca(cp: &ChannelParams, law: &WeightLaw) -> f64 {
    VORONOI_SHAPE * zeta_dagger(cp, law)
}

/// Intensity of a homogeneous PPP after i.i.d. linear maps, given
/// E[1/√det(TᵀT)] (E[T^{-2}] for isotropic planar scaling).
pub fn mapped_intensity(lambda: f64, moment_inv_det: f64) -> f64 {
    lambda * moment_inv_det
}

/// Density of void base stations, λ_B·p_∅.
pub fn void_intensity(lambda_b: f64, p_void: f64) -> f64 {
    lambda_b * p_void
}
