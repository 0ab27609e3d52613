//! Exact simulation of the N-particle process.
//!
//! All N Poisson measures share the intensity `f(X_{t-})`, so the jumps form
//! one point process of intensity `N f(X_{t-})` and the jumping particle is
//! uniform on `{1..N}`. That stream is simulated by thinning: candidates come
//! from a local majorant `N M` valid over a short lookahead window along the
//! deterministic flow, and each is kept with probability `f(X_{t-}) / M`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentDraw;
use crate::error::{Error, Result};
use crate::model::{Drift, ModelSpec};
use crate::rng;

pub const BLOWUP_GUARD: f64 = 1e12;
const MAX_WINDOW: f64 = 0.1;
const EVENTS_PER_WINDOW: f64 = 8.0;
/// Relative padding for rounding in the majorant.
const MAJORANT_PAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdmpEvent {
    pub time: f64,
    pub pre_state: f64,
    /// Zero-based index `J - 1` of the particle that jumped.
    pub particle: usize,
    pub post_state: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdmpPath {
    pub t0: f64,
    pub x0: f64,
    pub horizon: f64,
    pub drift: Drift,
    pub events: Vec<PdmpEvent>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Multiplies the thinning majorant; the law of the path must not change.
    pub majorant_inflation: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            majorant_inflation: 1.0,
        }
    }
}

/// Drives the thinning loop on `[t0, horizon]`, reporting accepted jumps as
/// `(time, pre, particle, post)`. Returns the final state.
pub(crate) fn run_thinning<F>(
    model: &ModelSpec,
    values: &[f64],
    x0: f64,
    t0: f64,
    rng: &mut ChaCha8Rng,
    opts: &SimOptions,
    mut on_event: F,
) -> Result<f64>
where
    F: FnMut(f64, f64, usize, f64),
{
    let n = values.len();
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    let drift = model.drift;
    let rate = model.rate;
    let lip_f = rate.lipschitz();
    let lip_b = drift.lipschitz();
    let f_sup = rate.sup();
    let horizon = model.horizon;

    if !x0.is_finite() || x0.abs() > BLOWUP_GUARD {
        return Err(Error::AbortedPath { time: t0, state: x0 });
    }
    let mut t = t0;
    let mut x = x0;
    while t < horizon {
        let fx = rate.value(x);
        let mut window = if fx > 0.0 {
            (EVENTS_PER_WINDOW / (nf * fx)).min(MAX_WINDOW)
        } else {
            MAX_WINDOW
        };
        if lip_b * window > 0.5 {
            window = 0.5 / lip_b;
        }
        window = window.min(horizon - t);
        // |b(y)| <= |b(x)| + L_b |y - x| along the flow, solved as a fixed point
        let displacement = window * drift.value(x).abs() / (1.0 - lip_b * window);
        let majorant = (fx + lip_f * displacement).min(f_sup) * (1.0 + MAJORANT_PAD) * opts.majorant_inflation;

        let tau = if majorant > 0.0 {
            rng.sample::<f64, _>(Exp1) / (nf * majorant)
        } else {
            f64::INFINITY
        };
        if tau >= window {
            let end = t + window;
            x = drift.flow(x, window);
            t = if horizon - end <= 0.0 { horizon } else { end };
            if !x.is_finite() || x.abs() > BLOWUP_GUARD {
                return Err(Error::AbortedPath { time: t, state: x });
            }
            continue;
        }
        t += tau;
        let pre = drift.flow(x, tau);
        let intensity = rate.value(pre);
        if intensity > majorant {
            return Err(Error::InvalidThinning {
                time: t,
                intensity,
                majorant,
            });
        }
        let u: f64 = rng.random();
        if u * majorant < intensity {
            let j = rng.random_range(0..n);
            let post = pre + values[j] / sqrt_n;
            if !post.is_finite() || post.abs() > BLOWUP_GUARD {
                return Err(Error::AbortedPath { time: t, state: post });
            }
            on_event(t, pre, j, post);
            x = post;
        } else {
            x = pre;
        }
    }
    Ok(x)
}

pub fn simulate_pdmp(model: &ModelSpec, env: &EnvironmentDraw, x0: f64, seed: u64) -> Result<PdmpPath> {
    simulate_pdmp_with(model, env, x0, seed, &SimOptions::default())
}

pub fn simulate_pdmp_with(
    model: &ModelSpec,
    env: &EnvironmentDraw,
    x0: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<PdmpPath> {
    if env.n() == 0 {
        return Err(Error::param("environment is empty"));
    }
    let mut rng = rng::stream(seed);
    let mut events = Vec::new();
    run_thinning(
        model,
        &env.values,
        x0,
        0.0,
        &mut rng,
        opts,
        |time, pre_state, particle, post_state| {
            events.push(PdmpEvent {
                time,
                pre_state,
                particle,
                post_state,
            })
        },
    )?;
    Ok(PdmpPath {
        t0: 0.0,
        x0,
        horizon: model.horizon,
        drift: model.drift,
        events,
        seed,
    })
}

/// Right-continuous evaluation: at an event time the post-jump state.
pub fn path_value_at(path: &PdmpPath, t: f64) -> Result<f64> {
    if !(t >= path.t0 && t <= path.horizon) {
        return Err(Error::Range {
            t,
            start: path.t0,
            end: path.horizon,
        });
    }
    let k = path.events.partition_point(|e| e.time <= t);
    let (t_last, x_last) = if k == 0 {
        (path.t0, path.x0)
    } else {
        let e = &path.events[k - 1];
        (e.time, e.post_state)
    };
    Ok(path.drift.flow(x_last, t - t_last))
}

/// Left limit `X_{t-}`.
pub fn path_left_limit(path: &PdmpPath, t: f64) -> Result<f64> {
    if !(t > path.t0 && t <= path.horizon) {
        return Err(Error::Range {
            t,
            start: path.t0,
            end: path.horizon,
        });
    }
    let k = path.events.partition_point(|e| e.time < t);
    let (t_last, x_last) = if k == 0 {
        (path.t0, path.x0)
    } else {
        let e = &path.events[k - 1];
        (e.time, e.post_state)
    };
    Ok(path.drift.flow(x_last, t - t_last))
}

/// States at sorted observation times plus `sup_t |X_t|` and the event count.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub states: Vec<f64>,
    pub running_sup: f64,
    pub events: usize,
}

/// Simulates one path and keeps only what the ensembles need. Flows are
/// monotone in one dimension, so the running supremum is attained at an
/// endpoint of some inter-jump segment.
pub fn observe_pdmp(
    model: &ModelSpec,
    values: &[f64],
    x0: f64,
    times: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Observation> {
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let drift = model.drift;
    let mut states = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut last = (0.0, x0);
    let mut sup = x0.abs();
    let mut count = 0;
    let x_end = run_thinning(
        model,
        values,
        x0,
        0.0,
        rng,
        &SimOptions::default(),
        |t, pre, _, post| {
            while next < times.len() && times[next] < t {
                states.push(drift.flow(last.1, times[next] - last.0));
                next += 1;
            }
            sup = sup.max(pre.abs()).max(post.abs());
            last = (t, post);
            count += 1;
        },
    )?;
    while next < times.len() {
        states.push(drift.flow(last.1, times[next] - last.0));
        next += 1;
    }
    sup = sup.max(x_end.abs());
    Ok(Observation {
        states,
        running_sup: sup,
        events: count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMoments {
    pub cond_mean: f64,
    pub cond_var: f64,
}

/// Closed-form conditional mean and variance at time `t` given the frozen
/// environment, for `b = 0` and `f = lambda`.
pub fn constant_rate_oracle(model: &ModelSpec, env: &EnvironmentDraw, x0: f64, t: f64) -> Result<ConditionalMoments> {
    let lambda = model.is_constant_rate_pure_jump().ok_or_else(|| {
        Error::Misuse(format!(
            "constant-rate oracle needs drift linear:0,0 and a constant rate, got drift {} and rate {}",
            model.drift, model.rate
        ))
    })?;
    if env.n() == 0 {
        return Err(Error::param("environment is empty"));
    }
    let n = env.n() as f64;
    let sum2 = crate::stats::compensated_sum(env.values.iter().map(|u| u * u));
    Ok(ConditionalMoments {
        cond_mean: x0 + lambda * t * env.s_n(),
        cond_var: lambda * t * sum2 / n,
    })
}
