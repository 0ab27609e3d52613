use disorder_core::coupling::{
    couple, couple_exact_gaussian, couple_kmt_dyadic, couple_naive_quantile, k_samples, CouplerKind,
};
use disorder_core::environment::{sample_environment, DisorderLaw};
use disorder_core::stats;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn increments(beta: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    beta.iter()
        .map(|b| {
            let d = b - prev;
            prev = *b;
            d
        })
        .collect()
}

fn assert_standard_normal(xs: &[f64], what: &str) {
    let d = stats::ks_statistic(xs, stats::normal_cdf);
    assert!(d < stats::ks_critical_1pct(xs.len()), "{what}: KS {d}");
}

#[test]
fn brownian_increments_are_standard_normal() {
    let n = 10_000;
    let g = sample_environment(DisorderLaw::GaussianCentered { std: 0.7 }, n, 1).unwrap();
    assert_standard_normal(&increments(&couple_exact_gaussian(&g).unwrap().beta), "exact");

    for law in [DisorderLaw::LaplaceCentered { scale: 1.0 }, DisorderLaw::Rademacher] {
        let d = sample_environment(law, n, 2).unwrap();
        let c = couple_naive_quantile(&d, 3);
        assert_standard_normal(&increments(&c.beta), &format!("naive {law}"));
    }

    let c = couple_kmt_dyadic(14, 4).unwrap();
    assert_standard_normal(&increments(&c.beta)[..n], "dyadic");
}

#[test]
fn dyadic_signs_and_binomial_sum() {
    let n = 64u64;
    let reps = 20_000;
    let sums: Vec<i64> = (0..reps)
        .map(|r| {
            let c = couple_kmt_dyadic(6, 500 + r).unwrap();
            assert!(c.draw.values.iter().all(|u| *u == 1.0 || *u == -1.0));
            c.draw.values.iter().sum::<f64>() as i64
        })
        .collect();
    // chi-square against the exact Binomial(64, 1/2) law of the number of +1
    let pmf: Vec<f64> = (0..=n)
        .map(|k| (stats::ln_choose(n, k) - n as f64 * 2f64.ln()).exp())
        .collect();
    let mut counts = vec![0.0; (n + 1) as usize];
    for s in &sums {
        counts[((s + n as i64) / 2) as usize] += 1.0;
    }
    // merge tails until every bin expects at least 5
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for k in 0..=n as usize {
        e += pmf[k] * reps as f64;
        o += counts[k];
        if e >= 5.0 {
            bins.push((e, o));
            e = 0.0;
            o = 0.0;
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += e;
        last.1 += o;
    }
    let chi2: f64 = bins.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let crit = ChiSquared::new((bins.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < crit, "chi2 {chi2} vs {crit} over {} bins", bins.len());
}

#[test]
fn w_is_normal_with_variance_sigma2() {
    let reps = 2_000;
    let cases = [
        (CouplerKind::ExactGaussian, DisorderLaw::GaussianCentered { std: 1.5 }),
        (
            CouplerKind::NaiveQuantile,
            DisorderLaw::UniformSymmetric { half_width: 1.0 },
        ),
        (CouplerKind::DyadicKmt, DisorderLaw::Rademacher),
    ];
    for (kind, law) in cases {
        let ws: Vec<f64> = (0..reps)
            .map(|r| couple(kind, law, 1024, 77 + r).unwrap().w() / law.sigma())
            .collect();
        assert_standard_normal(&ws, kind.name());
    }
}

#[test]
fn w_series_fluctuates_by_more_than_sigma() {
    let c = couple_kmt_dyadic(16, 12).unwrap();
    let hi = c.w_series.iter().copied().fold(f64::MIN, f64::max);
    let lo = c.w_series.iter().copied().fold(f64::MAX, f64::min);
    assert!(hi - lo > 1.0, "range {}", hi - lo);
}

#[test]
fn dyadic_median_k_is_bounded() {
    let meds: Vec<f64> = [8u32, 10, 12]
        .iter()
        .map(|j| stats::median(&k_samples(CouplerKind::DyadicKmt, DisorderLaw::Rademacher, 1 << j, 200, 3).unwrap()))
        .collect();
    let hi = meds.iter().copied().fold(f64::MIN, f64::max);
    let lo = meds.iter().copied().fold(f64::MAX, f64::min);
    assert!(hi / lo < 3.0, "{meds:?}");
}

#[test]
fn naive_median_k_grows() {
    let med = |j: u32| {
        stats::median(&k_samples(CouplerKind::NaiveQuantile, DisorderLaw::Rademacher, 1 << j, 200, 4).unwrap())
    };
    assert!(med(14) > 2.0 * med(6));
}

#[test]
fn exact_coupling_has_zero_k() {
    let ks = k_samples(
        CouplerKind::ExactGaussian,
        DisorderLaw::GaussianCentered { std: 2.0 },
        512,
        50,
        1,
    )
    .unwrap();
    assert!(ks.iter().all(|k| *k == 0.0));
}

#[test]
fn unsupported_pairs_are_rejected() {
    assert!(couple(
        CouplerKind::DyadicKmt,
        DisorderLaw::UniformSymmetric { half_width: 1.0 },
        64,
        0
    )
    .is_err());
    assert!(couple(CouplerKind::ExactGaussian, DisorderLaw::Rademacher, 64, 0).is_err());
    assert!(couple(CouplerKind::DyadicKmt, DisorderLaw::Rademacher, 100, 0).is_err());
}
