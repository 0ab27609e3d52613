//! WebAssembly bindings for the static page in `www/`. Every export takes
//! plain numbers and strings and returns a JSON string, so the page needs no
//! generated glue beyond `wasm-bindgen`'s.

use disorder_core::coupling::{couple, CouplerKind};
use disorder_core::environment::DisorderLaw;
use disorder_core::limit::simulate_limit_given_w;
use disorder_core::model::ModelSpec;
use disorder_core::operators::{generator_gap_bound, GapBoundReport, TestFunction};
use disorder_core::pdmp::simulate_pdmp;
use disorder_core::rng::{derive_seed, tag};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest `log2 N` the page may ask for; keeps a click under a second.
pub const MAX_LOG2: u32 = 16;

#[derive(Debug, Serialize)]
pub struct PathPair {
    pub n: usize,
    pub w: f64,
    pub s_n: f64,
    pub k_stat: f64,
    /// `(t, x)` at the start, before and after every jump, and at `T`.
    pub particle: Vec<(f64, f64)>,
    pub limit: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
pub struct Walk {
    pub n: usize,
    /// `sum_{j<=n} U_j` and `sigma beta_n` for `n = 1..N`.
    pub partial_sums: Vec<f64>,
    pub brownian: Vec<f64>,
    pub k_stat: f64,
    /// Index where `|sum U - sigma beta| / ln n` peaks.
    pub argmax: usize,
}

fn check_log2(n_log2: u32) -> Result<usize, String> {
    if !(1..=MAX_LOG2).contains(&n_log2) {
        return Err(format!("log2 N must lie in 1..={MAX_LOG2}, got {n_log2}"));
    }
    Ok(1usize << n_log2)
}

fn coupler_for(law: &DisorderLaw) -> CouplerKind {
    match law {
        DisorderLaw::Rademacher => CouplerKind::DyadicKmt,
        DisorderLaw::GaussianCentered { .. } => CouplerKind::ExactGaussian,
        _ => CouplerKind::NaiveQuantile,
    }
}

/// Particle path given `U^[N]` and the limit path given the coupled
/// `W^[N]`, under the tanh model.
pub fn path_pair(n_log2: u32, law: &str, seed: u64) -> Result<PathPair, String> {
    let n = check_log2(n_log2)?;
    let law: DisorderLaw = law.parse().map_err(|e| format!("{e}"))?;
    let model = ModelSpec::tanh_model(law);
    let env =
        couple(coupler_for(&law), law, n, derive_seed(seed, tag::COUPLING, n as u64, 0)).map_err(|e| e.to_string())?;
    let p =
        simulate_pdmp(&model, &env.draw, 0.0, derive_seed(seed, tag::PDMP, n as u64, 0)).map_err(|e| e.to_string())?;
    let mut particle = vec![(0.0, p.x0)];
    for e in &p.events {
        particle.push((e.time, e.pre_state));
        particle.push((e.time, e.post_state));
    }
    let end = disorder_core::pdmp::path_value_at(&p, model.horizon).map_err(|e| e.to_string())?;
    particle.push((model.horizon, end));
    let l = simulate_limit_given_w(&model, env.w(), 0.0, 1e-3, derive_seed(seed, tag::LIMIT, n as u64, 0))
        .map_err(|e| e.to_string())?;
    let limit = l.states.iter().enumerate().map(|(k, x)| (l.grid.time(k), *x)).collect();
    Ok(PathPair {
        n,
        w: env.w(),
        s_n: env.draw.s_n(),
        k_stat: env.k_stat,
        particle,
        limit,
    })
}

/// Rademacher walk against its dyadic Brownian coupling.
pub fn coupling_walk(n_log2: u32, seed: u64) -> Result<Walk, String> {
    check_log2(n_log2)?;
    let env = couple(CouplerKind::DyadicKmt, DisorderLaw::Rademacher, 1 << n_log2, seed).map_err(|e| e.to_string())?;
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = env
        .draw
        .values
        .iter()
        .map(|u| {
            acc += u;
            acc
        })
        .collect();
    let d = env.discrepancies();
    let argmax = (2..=d.len())
        .max_by(|&a, &b| (d[a - 1] / (a as f64).ln()).total_cmp(&(d[b - 1] / (b as f64).ln())))
        .unwrap_or(1);
    Ok(Walk {
        n: env.n(),
        partial_sums,
        brownian: env.beta.clone(),
        k_stat: env.k_stat,
        argmax,
    })
}

/// Both sides of the one-step generator inequality at `x`.
pub fn gap_bound(g: &str, x: f64, n_log2: u32, law: &str, seed: u64) -> Result<GapBoundReport, String> {
    let n = check_log2(n_log2)?;
    let g: TestFunction = g.parse().map_err(|e| format!("{e}"))?;
    let law: DisorderLaw = law.parse().map_err(|e| format!("{e}"))?;
    let model = ModelSpec::tanh_model(law);
    let env = couple(coupler_for(&law), law, n, seed).map_err(|e| e.to_string())?;
    generator_gap_bound(&g, x, &env, &model.drift, &model.rate).map_err(|e| e.to_string())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = pathPair)]
pub fn path_pair_js(n_log2: u32, law: &str, seed: u32) -> Result<String, JsValue> {
    to_js(path_pair(n_log2, law, seed as u64))
}

#[wasm_bindgen(js_name = couplingWalk)]
pub fn coupling_walk_js(n_log2: u32, seed: u32) -> Result<String, JsValue> {
    to_js(coupling_walk(n_log2, seed as u64))
}

#[wasm_bindgen(js_name = gapBound)]
pub fn gap_bound_js(g: &str, x: f64, n_log2: u32, law: &str, seed: u32) -> Result<String, JsValue> {
    to_js(gap_bound(g, x, n_log2, law, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_pair_ends_at_the_horizon() {
        let p = path_pair(8, "rademacher", 1).unwrap();
        assert_eq!(p.particle.first().unwrap().0, 0.0);
        assert_eq!(p.particle.last().unwrap().0, 1.0);
        assert_eq!(p.limit.len(), 1001);
        assert!(p.particle.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!((p.s_n - p.w).abs() * 16.0 <= p.k_stat * 256f64.ln() * (1.0 + 1e-12));
    }

    #[test]
    fn walk_peak_attains_k() {
        let w = coupling_walk(10, 4).unwrap();
        assert_eq!(w.partial_sums.len(), 1024);
        let i = w.argmax;
        let d = (w.partial_sums[i - 1] - w.brownian[i - 1]).abs() / (i as f64).ln();
        assert!((d - w.k_stat).abs() <= 1e-12 * w.k_stat.max(1.0));
    }

    #[test]
    fn gap_bound_holds_and_bad_input_is_reported() {
        let r = gap_bound("bump:1,0,0.5", 0.2, 6, "laplace:1", 9).unwrap();
        assert!(r.lhs <= r.rhs);
        assert!(gap_bound("tanh:1,1", 0.0, 0, "rademacher", 1).is_err());
        assert!(gap_bound("tanh:1,1", 0.0, 4, "cauchy", 1).is_err());
        assert!(path_pair(4, "uniform:-1", 1).is_err());
    }
}
