use proptest::prelude::*;
use voidcell::analytics::{rho_rca, user_count_pmf, void_prob_bounds, void_prob_rca};
use voidcell::channel::{zeta_dagger, ChannelParams, WeightLaw};
use voidcell::stats::wilson;
use voidcell::{Point2, SimulationWindow};

fn channel() -> impl Strategy<Value = ChannelParams> {
    (2.1f64..6.0, 0.0f64..1.0, -2.0f64..2.0, 0.0f64..3.0).prop_map(|(alpha, t, mu, s2)| {
        // m strictly above 2/alpha keeps the negative moment finite
        let m = 2.0 / alpha + 0.05 + t * 4.0;
        ChannelParams::new(m, mu, s2, alpha).unwrap()
    })
}

fn weight_law() -> impl Strategy<Value = WeightLaw> {
    prop_oneof![
        Just(WeightLaw::Unit),
        (-1.0f64..1.0, 0.0f64..1.5).prop_map(|(mu, sigma2)| WeightLaw::LogNormal { mu, sigma2 }),
    ]
}

proptest! {
    #[test]
    fn zeta_dagger_at_least_one(cp in channel(), law in weight_law()) {
        let z = zeta_dagger(&cp, &law);
        prop_assert!(z.is_finite());
        prop_assert!(z >= 1.0 - 1e-9, "zeta = {z}");
    }

    #[test]
    fn zeta_dagger_ignores_mu(cp in channel(), law in weight_law(), shift in -3.0f64..3.0) {
        let moved = ChannelParams::new(cp.m, cp.mu + shift, cp.sigma2, cp.alpha).unwrap();
        let (a, b) = (zeta_dagger(&cp, &law), zeta_dagger(&moved, &law));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn rca_formula_between_bounds(cp in channel(), law in weight_law(), ratio in 0.05f64..50.0) {
        let lambda_u = 370.0;
        let lambda_b = lambda_u / ratio;
        let p = void_prob_rca(lambda_u, lambda_b, rho_rca(&cp, &law));
        let b = void_prob_bounds(lambda_u, lambda_b, zeta_dagger(&cp, &law));
        prop_assert!(b.lower <= p * (1.0 + 1e-12), "{} > {p}", b.lower);
        prop_assert!(p <= b.upper * (1.0 + 1e-12), "{p} > {}", b.upper);
    }

    #[test]
    fn void_prob_decreases_in_rho(r1 in 0.5f64..100.0, dr in 0.01f64..100.0, ratio in 0.05f64..50.0) {
        let a = void_prob_rca(ratio, 1.0, r1);
        let b = void_prob_rca(ratio, 1.0, r1 + dr);
        prop_assert!(b <= a + 1e-15);
        prop_assert!(b >= (-ratio).exp() - 1e-15);
    }

    #[test]
    fn void_prob_decreases_in_load(rho in 0.5f64..100.0, x in 0.01f64..50.0, dx in 0.01f64..10.0) {
        let a = void_prob_rca(x, 1.0, rho);
        let b = void_prob_rca(x + dx, 1.0, rho);
        prop_assert!(b < a);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn user_count_pmf_is_a_distribution(ratio in 0.1f64..8.0, shape in 1.0f64..20.0) {
        let lambda_b = 370.0 / ratio;
        let (mut total, mut mean) = (0.0, 0.0);
        for n in 0..2000u64 {
            let p = user_count_pmf(n, 370.0, lambda_b, shape);
            prop_assert!(p >= 0.0);
            total += p;
            mean += n as f64 * p;
        }
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
        let p0 = user_count_pmf(0, 370.0, lambda_b, shape);
        prop_assert!((p0 - void_prob_rca(370.0, lambda_b, shape)).abs() < 1e-12);
        prop_assert!((mean - ratio).abs() < 1e-6 * ratio.max(1.0), "mean {mean}");
    }

    #[test]
    fn wilson_interval_contains_estimate(k in 0u64..1000, extra in 0u64..1000) {
        let n = (k + extra).max(1) as f64;
        let p = k as f64 / n;
        let (lo, hi) = wilson(p, n, 1.96);
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn torus_distance_is_a_bounded_symmetric_metric(
        side in 0.5f64..20.0,
        c in prop::array::uniform6(0.0f64..1.0),
    ) {
        let w = SimulationWindow::toroidal(side).unwrap();
        let p = |x: f64, y: f64| Point2 { x: x * side, y: y * side };
        let (a, b, q) = (p(c[0], c[1]), p(c[2], c[3]), p(c[4], c[5]));
        let ab = w.distance(a, b);
        prop_assert!((ab - w.distance(b, a)).abs() < 1e-12);
        prop_assert!(ab <= w.max_distance() + 1e-12);
        prop_assert!(ab <= w.distance(a, q) + w.distance(q, b) + 1e-12);
    }
}

