mod common;

use chebqr::cheb::{eval_cheb, integrate_series, ChebGrid, ChebSeries, ConstantMode};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn values(d: std::ops::RangeInclusive<usize>, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    d.prop_flat_map(move |n| prop::collection::vec(lo..=hi, n))
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn interpolation_reproduces_root_values(v in values(1..=64, -10.0, 10.0)) {
        let grid = ChebGrid::new(v.len()).unwrap();
        let series = grid.values_to_coeffs(&v).unwrap();
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (k, &t) in grid.roots().iter().enumerate() {
            let got = series.eval(t).unwrap();
            prop_assert!((got - v[k]).abs() <= 1e-12 * scale, "root {k}: {got} vs {}", v[k]);
        }
    }

    #[test]
    fn integration_is_exact_for_basis_polynomials(c in values(1..=64, -1.0, 1.0), k in -5.0f64..5.0) {
        let series = ChebSeries::new(c.clone()).unwrap();
        let p = integrate_series(&series, k, ConstantMode::Q0).unwrap();
        let scale = c.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..1000 {
            let tau = i as f64 / 999.0;
            let want = k + common::integral_from_zero(&c, tau);
            let got = p.eval(tau).unwrap();
            prop_assert!((got - want).abs() <= 1e-12 * scale.max(k.abs()), "tau {tau}: {got} vs {want}");
        }
    }

    #[test]
    fn q0_constant_anchors_lowest_quantile(c in values(1..=64, -10.0, 10.0), k in -1e3f64..1e3) {
        let p = integrate_series(&ChebSeries::new(c).unwrap(), k, ConstantMode::Q0).unwrap();
        let at0 = p.eval(0.0).unwrap();
        prop_assert!((at0 - k).abs() <= 1e-12 * k.abs().max(1.0), "{at0} vs {k}");
    }

    #[test]
    fn clenshaw_matches_direct_sum(c in values(1..=80, -10.0, 10.0), tau in 0.0f64..=1.0) {
        let got = eval_cheb(&c, tau).unwrap();
        let want = common::direct_eval(&c, tau);
        let scale = c.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!((got - want).abs() <= 1e-12 * scale, "{got} vs {want}");
    }

    #[test]
    fn dct_matches_direct_product(v in values(1..=128, -10.0, 10.0)) {
        let grid = ChebGrid::new(v.len()).unwrap();
        let got = grid.values_to_coeffs(&v).unwrap();
        for (a, b) in got.coeffs().iter().zip(common::direct_dct(&v)) {
            prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
}

/// P integrated from strictly positive root values, checked for strict increase
/// along the ascending roots.
fn monotone_at_roots(d: usize) {
    let mut runner = proptest::test_runner::TestRunner::new(config(100));
    let strategy = prop::collection::vec(1e-3f64..=10.0, d);
    runner
        .run(&strategy, |v| {
            let grid = ChebGrid::new(d).unwrap();
            let p = integrate_series(&grid.values_to_coeffs(&v).unwrap(), 0.0, ConstantMode::Q0).unwrap();
            let q: Vec<f64> = grid.ascending_roots().iter().map(|&t| p.eval(t).unwrap()).collect();
            for (i, w) in q.windows(2).enumerate() {
                prop_assert!(w[1] > w[0], "P decreases between roots {i} and {}: {} -> {}", i + 1, w[0], w[1]);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn monotone_at_roots_d4() {
    monotone_at_roots(4);
}

#[test]
fn monotone_at_roots_d8() {
    monotone_at_roots(8);
}

#[test]
fn monotone_at_roots_d16() {
    monotone_at_roots(16);
}

#[test]
fn monotone_at_roots_d32() {
    monotone_at_roots(32);
}

#[test]
fn monotone_at_roots_d64() {
    monotone_at_roots(64);
}
