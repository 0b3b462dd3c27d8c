//! Finite simulation windows standing in for the infinite plane.
//!
//! Two metrics are supported. The torus wraps each axis so every location is
//! statistically equivalent; the guard metric uses plain Euclidean distance
//! and restricts estimators to a central observation sub-window.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location on the plane, in km.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Toroidal,
    EuclideanWithGuard,
}

/// Square window `[0, side)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationWindow {
    side: f64,
    metric: Metric,
    guard_fraction: f64,
}

impl SimulationWindow {
    pub fn toroidal(side: f64) -> Result<Self> {
        Self::new(side, Metric::Toroidal, 0.0)
    }

    pub fn with_guard(side: f64, guard_fraction: f64) -> Result<Self> {
        Self::new(side, Metric::EuclideanWithGuard, guard_fraction)
    }

    pub fn new(side: f64, metric: Metric, guard_fraction: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::invalid("side", format!("window side must be > 0, got {side}")));
        }
        if !(0.0..0.5).contains(&guard_fraction) {
            return Err(Error::invalid(
                "guard_fraction",
                format!("guard fraction must lie in [0, 0.5), got {guard_fraction}"),
            ));
        }
        let guard_fraction = match metric {
            Metric::Toroidal => 0.0,
            Metric::EuclideanWithGuard => guard_fraction,
        };
        Ok(Self { side, metric, guard_fraction })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn guard_fraction(&self) -> f64 {
        self.guard_fraction
    }

    pub fn is_toroidal(&self) -> bool {
        self.metric == Metric::Toroidal
    }

    /// Area of the full sampling region.
    pub fn sampling_area(&self) -> f64 {
        self.side * self.side
    }

    /// Area over which estimators are normalised: the whole torus, or the
    /// observation sub-window under the guard metric.
    pub fn area(&self) -> f64 {
        let inner = (1.0 - 2.0 * self.guard_fraction) * self.side;
        inner * inner
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * self.side, 0.5 * self.side)
    }

    /// Whether `p` lies in the observation sub-window (always true on the torus
    /// once wrapped).
    pub fn in_observation(&self, p: Point2) -> bool {
        let lo = self.guard_fraction * self.side;
        let hi = self.side - lo;
        p.x >= lo && p.x < hi && p.y >= lo && p.y < hi
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x < self.side && p.y >= 0.0 && p.y < self.side
    }

    /// Map an arbitrary point into `[0, side)²` by wrapping each axis.
    pub fn wrap(&self, p: Point2) -> Point2 {
        Point2::new(wrap_coord(p.x, self.side), wrap_coord(p.y, self.side))
    }

    /// Per-axis displacement from `a` to `b`, folded onto the torus when the
    /// metric is toroidal.
    #[inline]
    pub fn displacement(&self, a: Point2, b: Point2) -> (f64, f64) {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        match self.metric {
            Metric::Toroidal => (fold(dx, self.side), fold(dy, self.side)),
            Metric::EuclideanWithGuard => (dx, dy),
        }
    }

    #[inline]
    pub fn distance_sq(&self, a: Point2, b: Point2) -> f64 {
        let (dx, dy) = self.displacement(a, b);
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(&self, a: Point2, b: Point2) -> f64 {
        self.distance_sq(a, b).sqrt()
    }

    /// Largest possible distance between two points of the window.
    pub fn max_distance(&self) -> f64 {
        match self.metric {
            Metric::Toroidal => self.side * std::f64::consts::FRAC_1_SQRT_2,
            Metric::EuclideanWithGuard => self.side * std::f64::consts::SQRT_2,
        }
    }

    pub fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        Point2::new(rng.random::<f64>() * self.side, rng.random::<f64>() * self.side)
    }
}

/// Distance between `a` and `b` under the window's metric.
pub fn distance(a: Point2, b: Point2, w: &SimulationWindow) -> f64 {
    w.distance(a, b)
}

pub fn uniform_point<R: Rng + ?Sized>(w: &SimulationWindow, rng: &mut R) -> Point2 {
    w.uniform_point(rng)
}

#[inline]
fn wrap_coord(v: f64, side: f64) -> f64 {
    let r = v.rem_euclid(side);
    // rem_euclid can round up to `side` for tiny negative inputs
    if r >= side {
        0.0
    } else {
        r
    }
}

#[inline]
fn fold(d: f64, side: f64) -> f64 {
    let d = d.abs().rem_euclid(side);
    d.min(side - d)
}

/// Expected number of base stations and of users the automatic window holds.
pub const AUTO_MIN_POINTS: f64 = 500.0;

/// Smallest side giving at least [`AUTO_MIN_POINTS`] expected base stations
/// and users. A zero user intensity only constrains the base stations.
pub fn auto_side(lambda_b: f64, lambda_u: f64) -> Result<f64> {
    if !(lambda_b > 0.0 && lambda_b.is_finite()) {
        return Err(Error::invalid("lambda_b", "no base stations (need lambda_b > 0)"));
    }
    if !(lambda_u >= 0.0 && lambda_u.is_finite()) {
        return Err(Error::invalid("lambda_u", "must be >= 0"));
    }
    let sparsest = if lambda_u > 0.0 { lambda_b.min(lambda_u) } else { lambda_b };
    Ok((AUTO_MIN_POINTS / sparsest).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(side: f64) -> SimulationWindow {
        SimulationWindow::toroidal(side).unwrap()
    }

    #[test]
    fn distance_examples() {
        let w = torus(10.0);
        assert_eq!(distance(Point2::new(0.0, 0.0), Point2::new(0.0, 0.0), &w), 0.0);
        assert_abs_diff_eq!(distance(Point2::new(0.0, 0.0), Point2::new(9.0, 0.0), &w), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(distance(Point2::new(1.0, 1.0), Point2::new(4.0, 5.0), &w), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn guard_metric_does_not_wrap() {
        let w = SimulationWindow::with_guard(10.0, 0.1).unwrap();
        assert_abs_diff_eq!(w.distance(Point2::new(0.0, 0.0), Point2::new(9.0, 0.0)), 9.0);
        assert_abs_diff_eq!(w.area(), 64.0, epsilon = 1e-12);
        assert!(w.in_observation(Point2::new(5.0, 5.0)));
        assert!(!w.in_observation(Point2::new(0.5, 5.0)));
    }

    #[test]
    fn auto_side_holds_enough_points() {
        let s = auto_side(740.0, 370.0).unwrap();
        assert!((370.0 * s * s - 500.0).abs() < 1e-9);
        assert!(740.0 * s * s >= 500.0);
        assert!((auto_side(100.0, 0.0).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!(auto_side(0.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(SimulationWindow::toroidal(0.0).is_err());
        assert!(SimulationWindow::toroidal(f64::NAN).is_err());
        assert!(SimulationWindow::with_guard(1.0, 0.5).is_err());
    }

    #[test]
    fn wrap_lands_inside() {
        let w = torus(10.0);
        for v in [-1e-17, -10.0, -3.5, 10.0, 27.25] {
            let p = w.wrap(Point2::new(v, v));
            assert!(w.contains(p), "{v} -> {p:?}");
        }
    }

    #[test]
    fn uniform_support_and_mean() {
        let w = torus(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let p = w.uniform_point(&mut rng);
            assert!(w.contains(p));
            sx += p.x;
            sy += p.y;
        }
        // SE of the mean of U(0,10) is 10/sqrt(12 n)
        let se = 10.0 / (12.0 * n as f64).sqrt();
        assert!((sx / n as f64 - 5.0).abs() < 3.0 * se);
        assert!((sy / n as f64 - 5.0).abs() < 3.0 * se);
    }

    #[test]
    fn uniform_grid_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let w = torus(10.0);
        let chi = ChiSquared::new(99.0).unwrap();
        let suites = 40;
        let mut passed = 0;
        for s in 0..suites {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
            let mut cells = [0u32; 100];
            let n = 100_000;
            for _ in 0..n {
                let p = w.uniform_point(&mut rng);
                cells[(p.x as usize) * 10 + p.y as usize] += 1;
            }
            let e = n as f64 / 100.0;
            let stat: f64 = cells.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
            if chi.sf(stat) > 0.01 {
                passed += 1;
            }
        }
        assert!(passed as f64 >= 0.95 * suites as f64, "{passed}/{suites}");
    }

    proptest! {
        #[test]
        fn toroidal_metric_axioms(
            ax in 0.0..10.0f64, ay in 0.0..10.0f64,
            bx in 0.0..10.0f64, by in 0.0..10.0f64,
            cx in 0.0..10.0f64, cy in 0.0..10.0f64,
        ) {
            let w = torus(10.0);
            let (a, b, c) = (Point2::new(ax, ay), Point2::new(bx, by), Point2::new(cx, cy));
            let ab = w.distance(a, b);
            prop_assert!((ab - w.distance(b, a)).abs() < 1e-12);
            prop_assert!(ab <= w.distance(a, c) + w.distance(c, b) + 1e-9);
            prop_assert!(ab <= w.max_distance() + 1e-12);
        }
    }
}
