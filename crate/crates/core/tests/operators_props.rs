use disorder_core::coupling::{couple, couple_exact_gaussian, CouplerKind};
use disorder_core::environment::{sample_environment, DisorderLaw};
use disorder_core::metrics::{fidi_gap, rate_fit, w1_empirical};
use disorder_core::model::{Drift, Rate};
use disorder_core::operators::{
    gen_limit_apply, gen_pdmp_apply, generator_gap_bound, taylor_remainder_bound, TestFunction,
};
use disorder_core::rng;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn sample(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

fn test_function() -> impl Strategy<Value = TestFunction> {
    prop_oneof![
        (-2.0f64..2.0, -3.0f64..3.0).prop_map(|(a, k)| TestFunction::TanhWave { a, k }),
        (-2.0f64..2.0, -1.0f64..1.0, 0.2f64..2.0).prop_map(|(a, m, s)| TestFunction::GaussBump { a, m, s }),
        (-2.0f64..2.0, -3.0f64..3.0).prop_map(|(a, k)| TestFunction::SinWave { a, k }),
    ]
}

proptest! {
    #[test]
    fn w1_is_a_metric((a, b, c) in (1usize..40).prop_flat_map(|n| (sample(n), sample(n), sample(n)))) {
        let ab = w1_empirical(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - w1_empirical(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert_eq!(w1_empirical(&a, &a).unwrap(), 0.0);
        let mut shuffled = a.clone();
        shuffled.reverse();
        prop_assert!(w1_empirical(&a, &shuffled).unwrap() < 1e-12);
        let tri = w1_empirical(&a, &c).unwrap() + w1_empirical(&c, &b).unwrap();
        prop_assert!(ab <= tri + 1e-9);
        if ab == 0.0 {
            let (mut x, mut y) = (a.clone(), b.clone());
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn w1_of_a_shift_is_the_shift(a in sample(30), h in -5.0f64..5.0) {
        let b: Vec<f64> = a.iter().map(|x| x + h).collect();
        prop_assert!((w1_empirical(&a, &b).unwrap() - h.abs()).abs() < 1e-9);
    }

    #[test]
    fn fidi_gap_is_dominated_by_w1((a, b) in (1usize..60).prop_flat_map(|n| (sample(n), sample(n)))) {
        // tanh is 1-Lipschitz
        let g = [TestFunction::TanhWave { a: 1.0, k: 1.0 }];
        let ra: Vec<Vec<f64>> = a.iter().map(|x| vec![*x]).collect();
        let rb: Vec<Vec<f64>> = b.iter().map(|x| vec![*x]).collect();
        let gap = fidi_gap(&ra, &rb, &g).unwrap().gap;
        prop_assert!(gap <= w1_empirical(&a, &b).unwrap() + 1e-12);
    }

    #[test]
    fn taylor_bound_holds_when_w_is_the_sum(g in test_function(), x in -3.0f64..3.0, n in 1usize..500, seed in any::<u64>()) {
        let law = DisorderLaw::UniformSymmetric { half_width: 1.7 };
        let env = sample_environment(law, n, seed).unwrap();
        let drift = Drift::Tanh { scale: 1.0, gain: 0.7 };
        let rate = Rate::Tanh { f0: 0.5, f1: 1.0, kappa: 1.0 };
        let lhs = (gen_pdmp_apply(&g, x, &env, &drift, &rate)
            - gen_limit_apply(&g, x, env.s_n(), law.variance(), &drift, &rate))
            .abs();
        let rhs = taylor_remainder_bound(&g, x, &env, &rate);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-13, "{lhs} > {rhs}");
    }

    #[test]
    fn generator_bound_never_fails(g in test_function(), x in -3.0f64..3.0, j in 1u32..11, seed in any::<u64>(), which in 0usize..3) {
        let n = 1usize << j;
        let (kind, law) = [
            (CouplerKind::ExactGaussian, DisorderLaw::GaussianCentered { std: 1.2 }),
            (CouplerKind::NaiveQuantile, DisorderLaw::LaplaceCentered { scale: 0.8 }),
            (CouplerKind::DyadicKmt, DisorderLaw::Rademacher),
        ][which];
        let c = couple(kind, law, n, seed).unwrap();
        let drift = Drift::Linear { alpha: 1.0, c: 0.2 };
        let rate = Rate::Constant { lambda: 1.5 };
        let r = generator_gap_bound(&g, x, &c, &drift, &rate);
        prop_assert!(r.is_ok(), "{r:?}");
    }
}

#[test]
fn w1_hand_cases() {
    assert_eq!(w1_empirical(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 1.0);
    assert!((w1_empirical(&[0.0, 0.0, 3.0], &[1.0, 1.0, 1.0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    assert!(w1_empirical(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn w1_recovers_a_gaussian_shift() {
    let n = 100_000;
    let mut r = rng::stream(17);
    let a: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let b: Vec<f64> = (0..n).map(|_| 1.0 + r.sample::<f64, _>(StandardNormal)).collect();
    let d = w1_empirical(&a, &b).unwrap();
    assert!((d - 1.0).abs() < 0.05, "{d}");
}

#[test]
fn exact_coupling_leaves_only_the_taylor_term() {
    let law = DisorderLaw::GaussianCentered { std: 1.0 };
    let g = TestFunction::GaussBump { a: 1.0, m: 0.0, s: 0.5 };
    let rate = Rate::Constant { lambda: 1.0 };
    let drift = Drift::Linear { alpha: 0.0, c: 0.0 };
    for n in [4, 64, 1024] {
        let c = couple_exact_gaussian(&sample_environment(law, n, 3).unwrap()).unwrap();
        let r = generator_gap_bound(&g, 0.3, &c, &drift, &rate).unwrap();
        assert_eq!(r.k_stat, 0.0);
        assert!(r.coupling_term < 1e-12);
    }
}

#[test]
fn rate_fit_recovers_a_synthetic_rate() {
    let ns = [64.0, 256.0, 1024.0, 4096.0];
    let gaps: Vec<f64> = ns.iter().map(|n: &f64| 0.7 * n.ln() / n.sqrt()).collect();
    let f = rate_fit(&ns, &gaps, &[0.01; 4], None).unwrap();
    assert!((f.c_hat - 0.7).abs() < 1e-12);
    assert!(!f.degenerate);
    assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    let slope = f.loglog_slope.unwrap();
    assert!(slope < -0.3 && slope > -0.5, "{slope}");

    let one = rate_fit(&[64.0], &[0.1], &[0.01], None).unwrap();
    assert!(one.degenerate && one.loglog_slope.is_none());
}
