use proptest::prelude::*;

use urllc_core::approx::{surrogate_weights, true_objective};
use urllc_core::fbl::{q_func, q_inv, rate_fbl, FblParams};

/// Gaussian tail by composite Simpson integration of the density over
/// `[x, x + 14]`; the neglected remainder is below 1e-44.
fn q_simpson(x: f64) -> f64 {
    let n = 40_000;
    let h = 14.0 / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(x) + pdf(x + 14.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(x + i as f64 * h);
    }
    s * h / 3.0
}

fn q_inv_bisect(eps: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_simpson(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn q_function_matches_quadrature() {
    for i in 0..=28 {
        let x = 0.25 * i as f64;
        let (q, oracle) = (q_func(x), q_simpson(x));
        assert!((q / oracle - 1.0).abs() < 1e-10, "Q({x}) = {q}, quadrature {oracle}");
    }
}

#[test]
fn q_inverse_matches_quadrature() {
    for eps in [0.4, 0.1, 1e-2, 1e-3, 1e-5, 1e-7, 1e-9, 1e-11] {
        let (x, oracle) = (q_inv(eps).unwrap(), q_inv_bisect(eps));
        assert!((x - oracle).abs() < 1e-9, "Q^-1({eps}) = {x}, bisection {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    // The direct normal approximation and the f-form used by the optimizer
    // are algebraically identical.
    #[test]
    fn rate_forms_agree(ln_gamma in (1e-2f64).ln()..(1e6f64).ln(), l in 20usize..400, k in 1usize..12, le in -12.0f64..-2.0) {
        prop_assume!(l > k);
        let (gamma, eps) = (ln_gamma.exp(), 10f64.powf(le));
        let p = FblParams::new(eps, l, k).unwrap();
        let direct = rate_fbl(gamma, k as f64 / l as f64, l, eps).unwrap();
        prop_assert!((p.rate(gamma) - direct).abs() <= 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn threshold_is_the_smallest_sinr_meeting_target(r in 0.0f64..6.0, l in 30usize..300, le in -10.0f64..-3.0) {
        let p = FblParams::new(10f64.powf(le), l, 10).unwrap();
        let t = p.sinr_threshold(r).unwrap();
        prop_assert!(t >= 1.0 / p.x_max * (1.0 - 1e-12));
        prop_assert!((p.rate(t) - r).abs() < 1e-8 * r.max(1.0));
        prop_assert!(p.rate(t * (1.0 + 1e-6)) > p.rate(t));
        if r > 0.0 {
            prop_assert!(p.rate(t * (1.0 - 1e-6)) < r);
        }
    }

    #[test]
    fn rate_is_increasing_above_the_penalty_edge(x in 0.0f64..1.0, l in 30usize..300) {
        let p = FblParams::new(1e-9, l, 10).unwrap();
        let g0 = 1.0 / p.x_max;
        let g1 = g0 * (1.0 + 10.0 * x) + 1e-9;
        prop_assert!(p.rate(g1 * 1.01) > p.rate(g1));
    }

    // Summing the per-device minorants gives a global minorant of the true
    // objective that touches it at the anchor.
    #[test]
    fn surrogate_is_a_tight_minorant(
        anchors in prop::collection::vec(0.3f64..1e4, 1..8),
        points in prop::collection::vec(0.3f64..1e4, 8),
        weights in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let k = anchors.len();
        let p = FblParams::new(1e-9, 100, 10).unwrap();
        let a = vec![p.a; k];
        let w = &weights[..k];
        let sw = surrogate_weights(w, &a, 0.1, &anchors).unwrap();
        let at_anchor = true_objective(w, &a, 0.1, &anchors);
        prop_assert!((sw.surrogate(&anchors) - at_anchor).abs() <= 1e-9 * at_anchor.abs().max(1.0));
        let x = &points[..k];
        prop_assert!(sw.surrogate(x) <= true_objective(w, &a, 0.1, x) + 1e-9);
    }
}
