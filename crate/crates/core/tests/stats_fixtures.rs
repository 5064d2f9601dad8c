//! Welch and Pearson against values computed with mpmath at 50 digits.

use featurenull::stats::{student_t_cdf, student_t_two_sided};
use featurenull::{pearson, welch_t_test};
use proptest::prelude::*;

fn close(got: f64, want: f64, tol: f64) {
    let err = (got - want).abs() / want.abs().max(1.0);
    assert!(err < tol, "{got} vs {want}");
}

/// Relative error, for p-values far below one.
fn close_rel(got: f64, want: f64, tol: f64) {
    assert!(((got - want) / want).abs() < tol, "{got} vs {want}");
}

#[test]
fn welch_fixture_integers() {
    let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
    close(r.statistic, -1.897_366_596_101_027_6, 1e-9);
    close(r.dof, 5.882_352_941_176_471, 1e-9);
    close_rel(r.p_value, 0.107_531_194_930_627_24, 1e-9);
    assert_eq!((r.n1, r.n2), (5, 5));
}

#[test]
fn welch_fixture_unbalanced() {
    let a = [0.5, 1.5, -2.25, 3.0, 4.75, 0.0, 1.0];
    let b = [10.0, 12.5, 9.75, 11.0];
    let r = welch_t_test(&a, &b).unwrap();
    close(r.statistic, -9.155_985_137_466_341, 1e-9);
    close(r.dof, 8.982_275_311_569_329, 1e-9);
    close_rel(r.p_value, 7.517_787_429_847_265e-6, 1e-9);
}

const XS: [f64; 20] = [
    0.3, 1.7, 2.2, 3.9, 4.1, 5.5, 6.0, 7.8, 8.3, 9.9, 10.2, 11.6, 12.1, 13.4, 14.8, 15.0, 16.7,
    17.3, 18.9, 19.4,
];

#[test]
fn pearson_fixture_strong() {
    let ys = [
        1.1, 2.9, 2.0, 5.2, 4.4, 7.9, 6.1, 9.4, 8.0, 12.6, 10.0, 13.1, 15.5, 13.0, 17.2, 14.9,
        19.8, 18.1, 20.5, 22.3,
    ];
    let (rho, p) = pearson(&XS, &ys).unwrap();
    close(rho, 0.983_460_294_573_161_9, 1e-9);
    close_rel(p, 8.286_019_795_334_747e-15, 1e-6);
    assert!((p - 8.286_019_795_334_747e-15).abs() < 1e-9);
}

#[test]
fn pearson_fixture_moderate() {
    let ys = [
        5.0, 3.1, 6.2, 2.0, 7.7, 4.4, 3.3, 8.1, 5.9, 4.0, 9.2, 6.6, 3.8, 7.1, 10.4, 5.2, 8.8, 6.0,
        11.3, 7.5,
    ];
    let (rho, p) = pearson(&XS, &ys).unwrap();
    close(rho, 0.558_220_664_832_343_4, 1e-9);
    close_rel(p, 0.010_530_041_159_866_8, 1e-9);
}

#[test]
fn t_tail_fixtures() {
    for (t, dof, want) in [
        (2.0, 5.0, 0.101_939_478_829_858_36),
        (0.5, 1.0, 0.704_832_764_699_133_5),
        (3.7, 12.5, 0.002_842_337_423_094_189_4),
        (10.0, 30.0, 4.575_251_408_229_613e-11),
    ] {
        close_rel(student_t_two_sided(t, dof), want, 1e-9);
    }
}

#[test]
fn t_cdf_identities() {
    for dof in [1.0, 2.5, 7.0, 30.0, 1e4] {
        assert_eq!(student_t_cdf(0.0, dof), 0.5);
        for t in [0.01, 0.7, 1.96, 5.0, 40.0] {
            let s = student_t_cdf(t, dof) + student_t_cdf(-t, dof);
            assert!((s - 1.0).abs() < 1e-12, "dof {dof} t {t}: {s}");
        }
    }
}

#[test]
fn degenerate_inputs() {
    assert!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    assert!(welch_t_test(&[1.0], &[2.0, 3.0]).is_err());
    assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
}

proptest! {
    #[test]
    fn welch_p_falls_as_gap_grows(
        base in prop::collection::vec(-5.0f64..5.0, 4..20),
        other in prop::collection::vec(-5.0f64..5.0, 4..20),
        step in 0.05f64..1.0,
    ) {
        prop_assume!(featurenull::stats::variance(&base) > 1e-6);
        let mut last = f64::INFINITY;
        let mut last_t = f64::NEG_INFINITY;
        for i in 0..8 {
            let shifted: Vec<f64> = other.iter().map(|v| v + 10.0 + step * i as f64).collect();
            let r = welch_t_test(&shifted, &base).unwrap();
            prop_assert!(r.statistic > last_t);
            prop_assert!(r.p_value <= last);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            last = r.p_value;
            last_t = r.statistic;
        }
    }

    #[test]
    fn welch_is_antisymmetric(
        a in prop::collection::vec(-100.0f64..100.0, 2..15),
        b in prop::collection::vec(-100.0f64..100.0, 2..15),
    ) {
        prop_assume!(featurenull::stats::variance(&a) + featurenull::stats::variance(&b) > 1e-9);
        let x = welch_t_test(&a, &b).unwrap();
        let y = welch_t_test(&b, &a).unwrap();
        prop_assert_eq!(x.statistic, -y.statistic);
        prop_assert_eq!(x.p_value, y.p_value);
        prop_assert!(x.dof > 0.0);
    }

    #[test]
    fn pearson_of_affine_map(
        xs in prop::collection::vec(-50.0f64..50.0, 3..30),
        a in prop_oneof![0.1f64..10.0, -10.0f64..-0.1],
        b in -100.0f64..100.0,
    ) {
        prop_assume!(featurenull::stats::variance(&xs) > 1e-3);
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let (rho, _) = pearson(&xs, &ys).unwrap();
        prop_assert!((rho - a.signum()).abs() < 1e-12);
    }
}
