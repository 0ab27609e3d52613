//! Euler–Maruyama simulation of the limit diffusion
//! `dX = [b(X) + w f(X)] dt + sigma sqrt(f(X)) dB`, for a frozen `w`
//! (quenched), for `w = W^[N]` from a coupled environment, or for
//! `W ~ N(0, sigma^2)` drawn per path (annealed).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coupling::CoupledEnvironment;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::pdmp::BLOWUP_GUARD;
use crate::rng;

/// Uniform grid `t0 + k dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Covers `[0, horizon]` with steps no longer than `dt`. When `horizon`
    /// is not a multiple of `dt` the step is shortened to `horizon / n`.
    pub fn covering(horizon: f64, dt: f64) -> Result<TimeGrid> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {dt}")));
        }
        let ratio = horizon / dt;
        let nearest = ratio.round();
        let n_steps = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        } as usize;
        let n_steps = n_steps.max(1);
        Ok(TimeGrid {
            t0: 0.0,
            dt: horizon / n_steps as f64,
            n_steps,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Grid index of an observation time.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = ((t - self.t0) / self.dt).round();
        if k < 0.0 || k as usize > self.n_steps || (self.time(k as usize) - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::param(format!(
                "time {t} is not on the grid (dt = {}, {} steps)",
                self.dt, self.n_steps
            )));
        }
        Ok(k as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPath {
    pub grid: TimeGrid,
    pub states: Vec<f64>,
    pub brownian_increments: Vec<f64>,
    pub w_used: f64,
    pub seed: u64,
}

#[inline]
fn em_step(model: &ModelSpec, sigma: f64, w: f64, x: f64, dt: f64, db: f64) -> Result<f64> {
    let f = model.rate.value(x);
    if f < 0.0 {
        return Err(Error::Misuse(format!("negative intensity {f} at x = {x}")));
    }
    Ok(x + (model.drift.value(x) + w * f) * dt + sigma * f.sqrt() * db)
}

fn check_state(x: f64, t: f64) -> Result<()> {
    if !x.is_finite() || x.abs() > BLOWUP_GUARD {
        return Err(Error::AbortedPath { time: t, state: x });
    }
    Ok(())
}

/// Replays the recursion with stored increments.
pub fn replay(model: &ModelSpec, w: f64, x0: f64, grid: &TimeGrid, increments: &[f64]) -> Result<Vec<f64>> {
    let sigma = model.law.sigma();
    let mut states = Vec::with_capacity(increments.len() + 1);
    let mut x = x0;
    states.push(x);
    for (k, db) in increments.iter().enumerate() {
        x = em_step(model, sigma, w, x, grid.dt, *db)?;
        check_state(x, grid.time(k + 1))?;
        states.push(x);
    }
    Ok(states)
}

pub fn simulate_limit_given_w(model: &ModelSpec, w: f64, x0: f64, dt: f64, seed: u64) -> Result<DiffusionPath> {
    let grid = TimeGrid::covering(model.horizon, dt)?;
    let mut rng = rng::stream(seed);
    let sd = grid.dt.sqrt();
    let increments: Vec<f64> = (0..grid.n_steps)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let states = replay(model, w, x0, &grid, &increments)?;
    Ok(DiffusionPath {
        grid,
        states,
        brownian_increments: increments,
        w_used: w,
        seed,
    })
}

/// Draw of the annealed environment `W ~ N(0, sigma^2)` for a path seed.
pub fn annealed_w(model: &ModelSpec, seed: u64) -> f64 {
    let mut rng = rng::stream(rng::derive_seed(seed, rng::tag::ANNEALED_W, 0, 0));
    model.law.sigma() * rng.sample::<f64, _>(StandardNormal)
}

pub fn simulate_annealed(model: &ModelSpec, x0: f64, dt: f64, seed: u64) -> Result<DiffusionPath> {
    let w = annealed_w(model, seed);
    simulate_limit_given_w(model, w, x0, dt, seed)
}

/// Paths of `X(W^[N])`: one frozen `w` for the ensemble, fresh noise per path.
pub fn coupled_limit_ensemble(
    model: &ModelSpec,
    coupled: &CoupledEnvironment,
    x0: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<DiffusionPath>> {
    if coupled.w_series.is_empty() {
        return Err(Error::param("coupled environment is empty"));
    }
    let w = coupled.w();
    let n = coupled.n() as u64;
    crate::par::map_indexed(n_paths, |i| {
        simulate_limit_given_w(model, w, x0, dt, rng::derive_seed(seed, rng::tag::LIMIT, n, i as u64))
    })
    .into_iter()
    .collect()
}

/// States of one path at grid indices, at step `dt` and (with common noise)
/// at step `dt / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitObservation {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub running_sup: f64,
}

/// Runs the fine scheme on `2 n` half-steps and the coarse scheme on the
/// pairwise sums of the same increments. `obs` are coarse grid indices.
pub(crate) fn observe_limit_pair(
    model: &ModelSpec,
    w: f64,
    x0: f64,
    grid: &TimeGrid,
    obs: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<LimitObservation> {
    let sigma = model.law.sigma();
    let half = 0.5 * grid.dt;
    let sd = half.sqrt();
    let mut coarse = Vec::with_capacity(obs.len());
    let mut fine = Vec::with_capacity(obs.len());
    let mut xc = x0;
    let mut xf = x0;
    let mut sup = x0.abs();
    let mut next = 0;
    for k in 0..=grid.n_steps {
        while next < obs.len() && obs[next] == k {
            coarse.push(xc);
            fine.push(xf);
            next += 1;
        }
        if k == grid.n_steps {
            break;
        }
        let d1 = sd * rng.sample::<f64, _>(StandardNormal);
        let d2 = sd * rng.sample::<f64, _>(StandardNormal);
        xf = em_step(model, sigma, w, xf, half, d1)?;
        xf = em_step(model, sigma, w, xf, half, d2)?;
        xc = em_step(model, sigma, w, xc, grid.dt, d1 + d2)?;
        check_state(xc, grid.time(k + 1))?;
        check_state(xf, grid.time(k + 1))?;
        sup = sup.max(xc.abs());
    }
    Ok(LimitObservation {
        coarse,
        fine,
        running_sup: sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::couple_exact_gaussian;
    use crate::environment::{sample_environment, DisorderLaw};
    use crate::model::Drift;
    use crate::stats;

    #[test]
    fn deterministic_ode_limit() {
        let mut m = ModelSpec::constant_rate(0.0, DisorderLaw::Rademacher, 1.0, 2f64.ln());
        m.drift = Drift::Linear { alpha: 1.0, c: 0.0 };
        let p = simulate_limit_given_w(&m, 0.7, 1.0, 1e-3, 5).unwrap();
        assert!((p.states.last().unwrap() - 0.5).abs() < 1e-3);
        assert_eq!(p.states.len(), p.grid.n_steps + 1);
    }

    #[test]
    fn grid_covering() {
        let g = TimeGrid::covering(1.0, 1e-3).unwrap();
        assert_eq!(g.n_steps, 1000);
        let g = TimeGrid::covering(2f64.ln(), 1e-3).unwrap();
        assert_eq!(g.n_steps, 694);
        assert!(g.dt <= 1e-3);
        assert!(TimeGrid::covering(1.0, 0.0).is_err());
        let g = TimeGrid::covering(1.0, 0.25).unwrap();
        assert_eq!(g.index_of(0.5).unwrap(), 2);
        assert!(g.index_of(0.3).is_err());
    }

    #[test]
    fn replay_identity_is_bit_exact() {
        let m = ModelSpec::tanh_model(DisorderLaw::LaplaceCentered { scale: 0.7 });
        let p = simulate_limit_given_w(&m, -0.4, 0.2, 1e-2, 8).unwrap();
        let again = replay(&m, p.w_used, 0.2, &p.grid, &p.brownian_increments).unwrap();
        assert_eq!(again, p.states);
    }

    #[test]
    fn increments_have_variance_dt() {
        let m = ModelSpec::tanh_model(DisorderLaw::Rademacher);
        let incs: Vec<f64> = (0..50)
            .flat_map(|s| {
                simulate_limit_given_w(&m, 0.0, 0.0, 1e-2, s)
                    .unwrap()
                    .brownian_increments
            })
            .collect();
        let v = stats::variance(&incs);
        assert!((v / 1e-2 - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn gaussian_closed_form_marginal() {
        // b = 0, f = lambda: X_t ~ N(x0 + w lambda t, sigma^2 lambda t)
        let lambda = 1.5;
        let law = DisorderLaw::UniformSymmetric { half_width: 1.2 };
        let m = ModelSpec::constant_rate(lambda, law, 0.3, 1.0);
        let w = 0.8;
        let finals: Vec<f64> = crate::par::map_indexed(100_000, |i| {
            *simulate_limit_given_w(&m, w, 0.3, 0.05, i as u64)
                .unwrap()
                .states
                .last()
                .unwrap()
        });
        let (mean, se) = stats::mean_se(&finals);
        assert!((mean - (0.3 + w * lambda)).abs() < 3.0 * se);
        let var = stats::variance(&finals);
        assert!((var / (law.variance() * lambda) - 1.0).abs() < 0.05);
    }

    #[test]
    fn annealed_delegates_to_given_w() {
        let m = ModelSpec::tanh_model(DisorderLaw::Rademacher);
        let a = simulate_annealed(&m, 0.0, 1e-2, 17).unwrap();
        let b = simulate_limit_given_w(&m, a.w_used, 0.0, 1e-2, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn annealed_w_is_normal_with_variance_sigma2() {
        let law = DisorderLaw::LaplaceCentered { scale: 0.5 };
        let m = ModelSpec::tanh_model(law);
        let ws: Vec<f64> = (0..10_000).map(|s| annealed_w(&m, s)).collect();
        let sigma = law.sigma();
        let d = stats::ks_statistic(&ws, |x| stats::normal_cdf(x / sigma));
        assert!(d < stats::ks_critical_1pct(ws.len()), "{d}");
    }

    #[test]
    fn annealed_mean_is_x0_for_constant_rate() {
        let m = ModelSpec::constant_rate(2.0, DisorderLaw::Rademacher, 0.5, 1.0);
        let finals: Vec<f64> = crate::par::map_indexed(40_000, |i| {
            *simulate_annealed(&m, 0.5, 0.1, i as u64)
                .unwrap()
                .states
                .last()
                .unwrap()
        });
        let (mean, se) = stats::mean_se(&finals);
        assert!((mean - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn coupled_ensemble_uses_frozen_w() {
        let law = DisorderLaw::GaussianCentered { std: 1.3 };
        let m = ModelSpec::constant_rate(1.0, law, 0.0, 1.0);
        let draw = sample_environment(law, 256, 3).unwrap();
        let c = couple_exact_gaussian(&draw).unwrap();
        assert!((c.w() - draw.s_n()).abs() < 1e-12);
        let paths = coupled_limit_ensemble(&m, &c, 0.0, 0.05, 20_000, 9).unwrap();
        assert!(paths.iter().all(|p| p.w_used == c.w()));
        let finals: Vec<f64> = paths.iter().map(|p| *p.states.last().unwrap()).collect();
        let (mean, se) = stats::mean_se(&finals);
        assert!((mean - c.w()).abs() < 3.0 * se);
    }

    #[test]
    fn fine_and_coarse_share_noise() {
        let m = ModelSpec::constant_rate(1.0, DisorderLaw::Rademacher, 0.0, 1.0);
        let grid = TimeGrid::covering(1.0, 0.1).unwrap();
        let mut rng = rng::stream(3);
        let o = observe_limit_pair(&m, 0.5, 0.0, &grid, &[0, 5, 10], &mut rng).unwrap();
        // constant coefficients: both schemes are exact and agree
        for (c, f) in o.coarse.iter().zip(&o.fine) {
            assert!((c - f).abs() < 1e-12);
        }
        assert_eq!(o.coarse[0], 0.0);
    }
}
