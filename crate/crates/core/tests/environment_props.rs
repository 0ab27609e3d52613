use disorder_core::environment::{
    environment_statistics, exp_moment_estimate, lil_envelope, sample_environment, DisorderLaw,
};
use disorder_core::stats;
use proptest::prelude::*;

const LAWS: [DisorderLaw; 4] = [
    DisorderLaw::Rademacher,
    DisorderLaw::UniformSymmetric { half_width: 2.0 },
    DisorderLaw::LaplaceCentered { scale: 0.8 },
    DisorderLaw::GaussianCentered { std: 1.3 },
];

fn law_strategy() -> impl Strategy<Value = DisorderLaw> {
    prop_oneof![
        Just(DisorderLaw::Rademacher),
        (0.1f64..5.0).prop_map(|a| DisorderLaw::UniformSymmetric { half_width: a }),
        (0.1f64..3.0).prop_map(|s| DisorderLaw::LaplaceCentered { scale: s }),
        (0.1f64..3.0).prop_map(|s| DisorderLaw::GaussianCentered { std: s }),
    ]
}

proptest! {
    #[test]
    fn draws_extend_by_prefix(law in law_strategy(), n in 1usize..300, seed in any::<u64>()) {
        let short = sample_environment(law, n, seed).unwrap();
        let long = sample_environment(law, n + 1, seed).unwrap();
        prop_assert_eq!(&short.values[..], &long.values[..n]);
        prop_assert_eq!(short.prefix(n / 2 + 1).values, long.prefix(n / 2 + 1).values);
    }

    #[test]
    fn statistics_are_nonnegative(law in law_strategy(), n in 1usize..200, seed in any::<u64>()) {
        let s = environment_statistics(&sample_environment(law, n, seed).unwrap());
        prop_assert!(s.abs3_term >= 0.0 && s.var_gap >= 0.0 && s.abs4_mean >= 0.0);
    }
}

#[test]
fn every_law_is_centered() {
    let n = 1_000_000;
    for law in LAWS {
        let d = sample_environment(law, n, 99).unwrap();
        let m = stats::mean(&d.values);
        assert!(m.abs() < 5.0 * law.sigma() / (n as f64).sqrt(), "{law}: mean {m}");
        let v = stats::variance(&d.values);
        assert!((v / law.variance() - 1.0).abs() < 0.01, "{law}: variance {v}");
    }
}

#[test]
fn bound_ingredients_decay_with_n() {
    for law in LAWS {
        let med = |n: usize| {
            let (a, v): (Vec<f64>, Vec<f64>) = (0..201)
                .map(|s| {
                    let st = environment_statistics(&sample_environment(law, n, s).unwrap());
                    (st.abs3_term, st.var_gap)
                })
                .unzip();
            (stats::median(&a), stats::median(&v))
        };
        let (a_small, v_small) = med(256);
        let (a_big, v_big) = med(4096);
        if law == DisorderLaw::Rademacher {
            // U^2 = 1 exactly
            assert_eq!(v_small, 0.0);
            assert_eq!(v_big, 0.0);
        } else {
            assert!(v_big < v_small, "{law}");
        }
        assert!(a_big < a_small, "{law}");
    }
}

#[test]
fn iterated_log_envelope_holds_for_most_draws() {
    let n = 1 << 16;
    let env = lil_envelope(n).unwrap();
    assert!(lil_envelope(2).is_none());
    for law in [DisorderLaw::Rademacher, DisorderLaw::LaplaceCentered { scale: 1.0 }] {
        let inside = (0..200)
            .filter(|&s| {
                let d = sample_environment(law, n, 1000 + s).unwrap();
                d.s_n().abs() / law.sigma() <= env
            })
            .count();
        assert!(inside as f64 / 200.0 > 0.95, "{law}: {inside}/200");
    }
}

/// `E exp(gamma |Z|)` for `Z ~ N(0, s^2)` by composite Simpson quadrature.
fn folded_exp_moment(gamma: f64, s: f64) -> f64 {
    let (a, b, m) = (0.0, 12.0 * s + 4.0 * gamma * s * s, 20_000);
    let h = (b - a) / m as f64;
    let f =
        |x: f64| 2.0 * (gamma * x).exp() * (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let mut acc = f(a) + f(b);
    for i in 1..m {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn gaussian_exp_moment_matches_quadrature() {
    let oracle = folded_exp_moment(1.0, 1.0);
    assert!((oracle - 2.7742).abs() < 1e-4);
    for n in [1, 16, 256] {
        let est = exp_moment_estimate(DisorderLaw::GaussianCentered { std: 1.0 }, 1.0, n, 20_000, 5).unwrap();
        assert!(
            (est.mean - oracle).abs() < est.ci * 1.5,
            "N={n}: {} +- {}",
            est.mean,
            est.ci
        );
        assert!(!est.saturated);
    }
}

#[test]
fn rademacher_exp_moment_bounded_in_n() {
    // E exp(|S_N|) <= 2 cosh(1/sqrt N)^N <= 2 e^{1/2}
    let cap = 2.0 * 0.5f64.exp();
    for n in [4, 64, 1024, 16384] {
        let est = exp_moment_estimate(DisorderLaw::Rademacher, 1.0, n, 2_000, 8).unwrap();
        assert!(est.mean < cap + est.ci, "N={n}: {}", est.mean);
    }
}
