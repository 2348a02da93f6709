//! Property tests for the invariants of each module.

use num_complex::Complex64;
use proptest::prelude::*;

use radavg::conditions::{carleson_profile, d_p, m_p, m_p_eps, n_p, n_value};
use radavg::kernels::{build_kernel, eval_kernel_derivative};
use radavg::numerics::grid::{PolarGrid, RadialGrid, Radius};
use radavg::numerics::quad;
use radavg::operator::{
    apply_t, apply_tn, default_lambda_grid, estimate_strong_norm, lp_norm, radial_maximal_check, random_step_rects,
    strong_norm_bracket, weak_pipeline_value, weak_quasinorm, RadialFunctionField, StepRect, TestFamily,
};
use radavg::weights::{classify_dhat, make_counterexample_nu, Membership, RadialWeight, WeightTriple};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn weight() -> impl Strategy<Value = RadialWeight> {
    prop_oneof![
        (-0.9f64..3.0, -2.0f64..2.0).prop_map(|(a, b)| RadialWeight::power_log(a, b).unwrap()),
        (0.0f64..5.0).prop_map(|c| RadialWeight::monomial(c).unwrap()),
        Just(RadialWeight::one()),
    ]
}

/// Weights with `ŵ` in both doubling classes, so every condition is finite.
fn regular_weight() -> impl Strategy<Value = RadialWeight> {
    prop_oneof![
        (0.0f64..2.0).prop_map(|a| RadialWeight::power_log(a, 0.0).unwrap()),
        (0.0f64..3.0).prop_map(|c| RadialWeight::monomial(c).unwrap()),
        Just(RadialWeight::one()),
    ]
}

fn polar() -> PolarGrid {
    PolarGrid::new(RadialGrid::new(8, 2).unwrap(), 32).unwrap()
}

fn rect() -> impl Strategy<Value = StepRect> {
    (0.0f64..0.9, 0.01f64..0.5, 0.0f64..6.28, 0.1f64..6.28, 0.1f64..3.0)
        .prop_map(|(lo, len, th, w, amp)| StepRect::new(lo, (lo + len).min(0.999), th, w, amp).unwrap())
}

fn probe() -> impl Strategy<Value = Complex64> {
    (0.01f64..0.999, 0.0f64..6.28).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn tails_decrease_toward_zero(w in weight(), r1 in 0.0f64..0.99, d in 0.001f64..0.5) {
        let r2 = (r1 + d).min(0.999_999);
        let (t1, t2) = (w.tail(r1).unwrap(), w.tail(r2).unwrap());
        prop_assert!(t2 < t1, "{w}: ŵ({r1}) = {t1}, ŵ({r2}) = {t2}");
        let deep = w.tail_at(Radius::from_log_gap(40.0 * std::f64::consts::LN_2)).unwrap();
        prop_assert!(deep < t1);
    }

    #[test]
    fn zeroth_moment_is_the_tail(w in weight(), t in 0.0f64..0.9999) {
        prop_assert!(close(w.moment(t, 0.0).unwrap(), w.tail(t).unwrap(), 1e-9));
    }

    #[test]
    fn rho_sequence_telescopes(w in weight(), k in 1.5f64..6.0, r in 0.0f64..0.9) {
        // radii kept in log-gap form: 1-ρ_n falls below f64 resolution of ρ_n
        let rho = w.rho_radii(k, Radius::new(r).unwrap(), 6).unwrap();
        let top = w.tail(r).unwrap();
        for n in 0..6 {
            let m = w.mass_between(rho[n], Some(rho[n + 1])).unwrap();
            let want = top * k.powi(-(n as i32)) * (k - 1.0) / k;
            prop_assert!(close(m, want, 1e-8), "n = {n}: {m} vs {want}");
        }
    }

    #[test]
    fn improper_integrals_are_additive(w in weight(), a in 0.0f64..0.5, d in 0.01f64..0.49) {
        let b = a + d;
        let whole = quad::integrate_improper(|s| w.density(s), a, 1e-12).unwrap();
        let head = quad::integrate(|s| w.eval(s).unwrap(), a, b, 1e-13).unwrap();
        let tail = quad::integrate_improper(|s| w.density(s), b, 1e-12).unwrap();
        prop_assert!(close(whole, head + tail, 1e-9), "{whole} vs {head} + {tail}");
    }

    #[test]
    fn constants_are_fixed(w in weight(), c in 0.0f64..10.0, z in probe()) {
        let f = RadialFunctionField::constant(polar(), c).unwrap();
        let v = apply_t(&w, &f, z).unwrap();
        prop_assert!((v - c).norm() < 1e-9 * c.max(1.0));
    }

    #[test]
    fn averaging_is_monotone(w in weight(), rects in prop::collection::vec(rect(), 1..4), extra in rect(), z in probe()) {
        let mut bigger = rects.clone();
        bigger.push(extra);
        let f = RadialFunctionField::step_function(polar(), rects).unwrap();
        let g = RadialFunctionField::step_function(polar(), bigger).unwrap();
        let (tf, tg) = (apply_t(&w, &f, z).unwrap().re, apply_t(&w, &g, z).unwrap().re);
        prop_assert!(tf <= tg * (1.0 + 1e-12) + 1e-300, "{tf} > {tg}");
    }

    #[test]
    fn counterexample_vanishes_on_gaps(k in 2.0f64..5.0) {
        let base = RadialWeight::one();
        let nu = make_counterexample_nu(&base, k).unwrap();
        let osc = nu.as_oscillating().unwrap();
        let r = osc.levels();
        prop_assert!(r.len() > 13);
        for n in 0..6 {
            let mid = 0.5 * (r[2 * n + 1].s() + r[2 * n + 2].s());
            prop_assert_eq!(nu.eval(mid).unwrap(), 0.0);
            prop_assert!(base.eval(mid).unwrap() > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn nontangential_maximal_dominates(w in weight(), rects in prop::collection::vec(rect(), 1..4), z in probe()) {
        let f = RadialFunctionField::step_function(polar(), rects).unwrap();
        let tn = apply_tn(&w, &f, z).unwrap();
        let t = apply_t(&w, &f, z).unwrap().norm();
        prop_assert!(tn >= t * (1.0 - 1e-9), "{tn} < {t}");
    }

    #[test]
    fn weak_quasinorm_below_strong(w in weight(), rects in prop::collection::vec(rect(), 1..4), p in 0.5f64..4.0) {
        let top: f64 = rects.iter().map(|r| r.amp).sum();
        let f = RadialFunctionField::step_function(polar(), rects).unwrap();
        let strong = lp_norm(&f, &w, p).unwrap();
        let weak = weak_quasinorm(&f, &w, p, &default_lambda_grid(top, 64)).unwrap();
        prop_assert!(weak <= strong * (1.0 + 1e-9), "{weak} > {strong}");
    }

    #[test]
    fn kernel_closed_forms_at_constant_weight(a in 0.0f64..0.9, at in 0.0f64..6.28, z in 0.0f64..0.9, zt in 0.0f64..6.28) {
        let k = build_kernel(&RadialWeight::one(), 0.9, 1e-12).unwrap();
        let a = Complex64::from_polar(a, at);
        let z = Complex64::from_polar(z, zt);
        let q = Complex64::new(1.0, 0.0) - z * a.conj();
        let k0 = eval_kernel_derivative(&k, 0, a, z).unwrap();
        let k1 = eval_kernel_derivative(&k, 1, a, z).unwrap();
        prop_assert!((k0 - q.powi(-2)).norm() <= 1e-8 * q.powi(-2).norm());
        let want = 2.0 * a.conj() * q.powi(-3);
        prop_assert!((k1 - want).norm() <= 1e-8 * want.norm().max(1e-12));
    }

    #[test]
    fn kernel_coefficients_nondecreasing(w in regular_weight()) {
        let k = build_kernel(&w, 0.8, 1e-10).unwrap();
        for c in k.coefficients().windows(2) {
            prop_assert!(c[1] >= c[0] * (1.0 - 1e-12), "{} < {}", c[1], c[0]);
        }
    }

    #[test]
    fn doubling_for_power_log(a in -0.9f64..3.0, b in -2.0f64..2.0) {
        let w = RadialWeight::power_log(a, b).unwrap();
        let g = RadialGrid::new(40, 4).unwrap();
        prop_assert_eq!(classify_dhat(&w, &g).unwrap().verdict, Membership::Member);
    }

    #[test]
    fn weak_pipeline_is_the_n_expression(
        omega in regular_weight(), nu in regular_weight(), eta in regular_weight(),
        p in 1.2f64..4.0, r in 0.05f64..0.999, frac in 0.05f64..1.0,
    ) {
        let t = r * frac;
        let direct = n_value(&omega, &nu, &eta, p, t, r).unwrap();
        let piped = weak_pipeline_value(&WeightTriple::new(omega, nu, eta), p, t, r).unwrap();
        prop_assert!(close(piped, direct, 1e-6), "{piped} vs {direct}");
    }

    #[test]
    fn strong_estimate_within_bracket(omega in regular_weight(), nu in regular_weight(), p in 1.3f64..4.0) {
        let g = RadialGrid::new(24, 4).unwrap();
        let mp = m_p(&omega, &nu, &nu, p, &g).unwrap();
        prop_assume!(mp.verdict.is_bounded());
        let triple = WeightTriple::pair(omega, nu);
        let est = estimate_strong_norm(&triple, p, &[TestFamily::Constants, TestFamily::MuckenhouptTest], &g).unwrap();
        prop_assert!(est.value <= strong_norm_bracket(p) * mp.sup() * (1.0 + 1e-3), "{} vs M_p = {}", est.value, mp.sup());
    }

    #[test]
    fn radial_maximal_inequalities(omega in regular_weight(), seed in 0u64..1000, p in 0.3f64..1.0, q in 1.0f64..3.0) {
        let f = RadialFunctionField::step_function(polar(), random_step_rects(seed, 0)).unwrap();
        let c = radial_maximal_check(&omega, &f, p, q, 2.0, 0.0).unwrap();
        prop_assert!(c.holds1 && c.holds2, "{c:?}");
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn np_and_mp_eps_agree(omega in regular_weight(), nu in regular_weight(), eta in regular_weight(), p in 1.5f64..3.0) {
        let g = RadialGrid::new(24, 4).unwrap();
        let np = n_p(&omega, &nu, &eta, p, &g).unwrap().profile.verdict;
        for eps in [0.5, 1.0, 2.0] {
            let me = m_p_eps(&omega, &nu, &eta, p, eps, &g).unwrap().verdict;
            prop_assert_eq!(np.is_bounded(), me.is_bounded(), "eps = {}: {} vs {}", eps, np, me);
        }
    }

    #[test]
    fn dp_and_carleson_agree(omega in weight(), nu in weight(), p in 0.5f64..3.0) {
        let g = RadialGrid::new(24, 4).unwrap();
        let d = d_p(&omega, &nu, p, &g).unwrap();
        let c = carleson_profile(&omega, &nu, p, &g).unwrap();
        prop_assert_eq!(d.verdict.is_bounded(), c.verdict.is_bounded());
        prop_assert!(close(d.sup(), c.sup(), 1e-6), "{} vs {}", d.sup(), c.sup());
    }

    #[test]
    fn sup_profiles_grow_under_refinement(omega in weight(), nu in weight(), eta in weight(), p in 1.2f64..3.0, eps in 0.2f64..2.0) {
        let g = RadialGrid::new(20, 2).unwrap();
        let coarse = m_p_eps(&omega, &nu, &eta, p, eps, &g).unwrap();
        let fine = m_p_eps(&omega, &nu, &eta, p, eps, &g.refined()).unwrap();
        prop_assert!(fine.sup() >= coarse.sup() * (1.0 - 1e-9), "{} < {}", fine.sup(), coarse.sup());
    }

    #[test]
    fn verdicts_stable_under_point_doubling(omega in regular_weight(), nu in regular_weight(), p in 1.0f64..3.0) {
        let g = RadialGrid::new(32, 4).unwrap();
        let a = d_p(&omega, &nu, p, &g).unwrap();
        let b = d_p(&omega, &nu, p, &g.refined()).unwrap();
        prop_assert!(a.verdict.same_kind(&b.verdict), "{} vs {}", a.verdict, b.verdict);
        if a.verdict.is_bounded() {
            prop_assert!(close(a.sup(), b.sup(), 0.01));
        }
    }
}
