use proptest::prelude::*;
use twistqkd::bounds::{
    binary_entropy, box2_bounds, chernoff_e, choose_params, definetti_bound, f_lca, finalf, insecurity, key_rate,
    net_key_rate, srodka_bound, BoundParams, BoundValue, Box2Params, DimPower,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_lca_decreases(m in 1.0f64..1e6, dm in 1.0f64..1e3, delta in 0.0f64..0.5, dd in 0.001f64..0.1) {
        prop_assert!(f_lca(m + dm, delta).log2 <= f_lca(m, delta).log2);
        prop_assert!(f_lca(m, delta + dd).log2 <= f_lca(m, delta).log2);
    }

    #[test]
    fn srodka_decreases_in_k(k in 1.0f64..1e6, eps in 0.001f64..1.0, z in 2.0f64..16.0) {
        prop_assert!(srodka_bound(2.0 * k, eps, z).log2 <= srodka_bound(k, eps, z).log2);
        prop_assert!(srodka_bound(k, eps, z).log2 <= z.log2() + 1e-12);
    }

    #[test]
    fn chernoff_increases_in_r(n in 100.0f64..1e9, frac in 0.0f64..0.49, delta in 0.0f64..0.3) {
        let r1 = (n * frac).floor();
        let r2 = (r1 + 1.0).min(n / 2.0);
        let a = chernoff_e(delta, n, r1, 4.0).unwrap();
        let b = chernoff_e(delta, n, r2, 4.0).unwrap();
        prop_assert!(b.log2 >= a.log2 - 1e-9);
        prop_assert!(a.log2.is_finite());
    }

    #[test]
    fn definetti_increases_in_dim(n in 1.0f64..1e12, k in 1.0f64..1e12, r in 0.0f64..1e5, dim in 1.0f64..300.0) {
        for power in [DimPower::Squared, DimPower::Linear] {
            let a = definetti_bound(n, k, r, dim, power);
            let b = definetti_bound(n, k, r, dim + 1.0, power);
            prop_assert!(b.log2 >= a.log2);
            prop_assert!(a.log2.is_finite() && a.value.is_finite());
        }
    }

    #[test]
    fn finalf_is_finite_and_dominates_terms(
        n_exp in 12u32..19,
        mx in 1u64..1_000_000,
        mz_frac in 0.01f64..0.4,
        r in 1u64..20_000,
        delta in 0.01f64..0.3,
    ) {
        let n = 10u64.pow(n_exp);
        let mz = ((n as f64) * mz_frac) as u64;
        prop_assume!(mx + mz < n);
        let p = BoundParams::new(n, mx, mz, r, delta, 2, 4, 40).unwrap();
        let f = finalf(&p).unwrap();
        let max = f.terms().iter().map(|t| t.log2).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(f.total.log2.is_finite() && f.total.value.is_finite());
        prop_assert!(f.total.log2 >= max - 1e-12);
        prop_assert!(f.total.log2 <= max + 2.0 + 1e-12);
        let ins = insecurity(&f.total, 1e-12);
        prop_assert!(ins.log2 >= 0.5 * (f.total.log2 + 2.0) - 1e-9);
    }

    #[test]
    fn box2_total_bounds_each_term(n in 1e8f64..1e15, mz_frac in 0.001f64..0.3, r in 1.0f64..1e4, delta in 0.01f64..0.3) {
        let b = box2_bounds(&Box2Params::from_protocol(n, n * mz_frac, r, delta, 2.0, 4.0)).unwrap();
        for t in [b.e1, b.e2, b.e3] {
            prop_assert!(b.total.log2 >= t.log2 - 1e-12);
        }
    }

    #[test]
    fn key_rates_are_bounded(ex in 0.0f64..=1.0, ez in 0.0f64..=1.0, n in 10u64..1_000_000) {
        let r = key_rate(ex, ez).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let net = net_key_rate(ex, ez, n / 10, n / 10, n).unwrap();
        prop_assert!(net <= r + 1e-15);
        prop_assert!(binary_entropy(ex).unwrap() <= 1.0 + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn m_x_monotone_in_s(s in 3u32..80, delta in 0.02f64..0.2) {
        let n = 1_000_000_000_000_000_000u64;
        let a = choose_params(s, delta, 2, 4, n);
        let b = choose_params(s + 1, delta, 2, 4, n);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(b.params.m_x >= a.params.m_x);
            prop_assert!(a.all_hold(), "{:?}", a.checks);
        }
    }
}

#[test]
fn solver_recheck_at_reference_point() {
    let sol = choose_params(40, 0.05, 2, 4, 1_000_000_000_000_000_000).unwrap();
    assert_eq!(sol.params.m_x, 256_000);
    assert!(sol.all_hold(), "{:#?}", sol.checks);
    let target = -40.0 + (1.0f64 + 1e-6).log2();
    for t in sol.finalf.terms() {
        assert!(t.log2 <= target, "{t:?}");
    }
    assert!(!sol.binding_r.is_empty() && !sol.binding_m_prime.is_empty());
}

#[test]
fn small_s_flags_the_bit_error_term() {
    // 2 e^{-s} only drops below 2^{-s} from s = 3 on
    let sol = choose_params(2, 0.05, 2, 4, 1_000_000_000_000_000_000).unwrap();
    let failing: Vec<_> = sol.checks.iter().filter(|c| !c.holds).map(|c| c.name.as_str()).collect();
    assert_eq!(failing, ["log2 eps_x term <= -s"]);
}

#[test]
fn solver_reports_infeasibility() {
    let err = choose_params(40, 0.05, 2, 4, 100_000).unwrap_err().to_string();
    assert!(err.contains("m_x"), "{err}");
}

#[test]
fn bound_value_sum_is_log_sum_exp() {
    let s = BoundValue::sum(&[BoundValue::from_log2(-3.0), BoundValue::from_log2(-3.0)]);
    assert!((s.log2 + 2.0).abs() < 1e-12);
    let huge = BoundValue::from_log2(5000.0);
    assert_eq!(huge.value, f64::MAX);
    assert!(huge.vacuous);
}
