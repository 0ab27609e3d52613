use disorder_core::environment::DisorderLaw;
use disorder_core::limit::{replay, simulate_limit_given_w, TimeGrid};
use disorder_core::model::{Drift, ModelSpec, Rate};
use disorder_core::{par, rng, stats};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn weak_model() -> ModelSpec {
    let mut m = ModelSpec::tanh_model(DisorderLaw::Rademacher);
    m.drift = Drift::Linear { alpha: 3.0, c: 1.0 };
    m.rate = Rate::Tanh {
        f0: 0.5,
        f1: 1.0,
        kappa: 1.0,
    };
    m
}

/// `tanh(X_T)` at steps `dt_min * 2^k` for `k < levels`, all driven by one
/// Brownian path sampled at the finest step.
fn crn_endpoints(m: &ModelSpec, w: f64, dt_min: f64, levels: u32, seed: u64) -> Vec<f64> {
    let fine = TimeGrid::covering(m.horizon, dt_min).unwrap();
    let mut r = rng::stream(seed);
    let sd = fine.dt.sqrt();
    let mut inc: Vec<f64> = (0..fine.n_steps)
        .map(|_| sd * r.sample::<f64, _>(StandardNormal))
        .collect();
    let mut out = Vec::new();
    for k in 0..levels {
        let grid = TimeGrid::covering(m.horizon, dt_min * (1u64 << k) as f64).unwrap();
        assert_eq!(grid.n_steps, inc.len());
        let xs = replay(m, w, 0.2, &grid, &inc).unwrap();
        out.push(xs.last().unwrap().tanh());
        inc = inc.chunks(2).map(|c| c.iter().sum()).collect();
    }
    out
}

#[test]
fn euler_weak_order_is_one() {
    let m = weak_model();
    let reps = 100_000;
    // levels: dt = 5e-4, 1e-3, 2e-3, 4e-3
    let rows = par::map_indexed(reps, |i| crn_endpoints(&m, 0.5, 5e-4, 4, 1000 + i as u64));
    // differences against the Richardson reference 2 E[dt=5e-4] - E[dt=1e-3]
    let errs: Vec<f64> = (1..4)
        .map(|k| {
            let d: Vec<f64> = rows.iter().map(|r| r[k] - (2.0 * r[0] - r[1])).collect();
            let (mean, se) = stats::mean_se(&d);
            assert!(mean.abs() > 3.0 * se, "level {k}: bias {mean} under noise {se}");
            mean.abs()
        })
        .collect();
    let xs: Vec<f64> = [1e-3f64, 2e-3, 4e-3].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let slope = stats::fit_line(&xs, &ys, None).unwrap().slope;
    assert!((0.7..=1.3).contains(&slope), "weak order {slope}, errors {errs:?}");
}

#[test]
fn ode_limit_converges_at_first_order() {
    // f = 0: dx = -x dt, exact x0 e^{-T}
    let mut m = ModelSpec::constant_rate(0.0, DisorderLaw::Rademacher, 1.0, 1.0);
    m.drift = Drift::Linear { alpha: 1.0, c: 0.0 };
    let err = |dt: f64| {
        let p = simulate_limit_given_w(&m, 0.3, 1.0, dt, 5).unwrap();
        (p.states.last().unwrap() - (-1.0f64).exp()).abs()
    };
    assert!(err(1e-3) < 1e-3);
    let ratio = err(2e-3) / err(1e-3);
    assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replay_reproduces_the_stored_path(seed in any::<u64>(), w in -2.0f64..2.0, dt in 1e-3f64..2e-2) {
        let m = ModelSpec::tanh_model(DisorderLaw::UniformSymmetric { half_width: 1.0 });
        let p = simulate_limit_given_w(&m, w, 0.1, dt, seed).unwrap();
        prop_assert_eq!(p.states.len(), p.grid.n_steps + 1);
        prop_assert!((p.grid.dt * p.grid.n_steps as f64 - m.horizon).abs() < 1e-12);
        prop_assert!(p.grid.dt <= dt * (1.0 + 1e-9));
        let again = replay(&m, w, 0.1, &p.grid, &p.brownian_increments).unwrap();
        prop_assert_eq!(again, p.states);
    }

    #[test]
    fn nonpositive_steps_are_rejected(dt in -1.0f64..=0.0) {
        let m = ModelSpec::tanh_model(DisorderLaw::Rademacher);
        prop_assert!(simulate_limit_given_w(&m, 0.0, 0.0, dt, 1).is_err());
    }
}
