//! Seeded, replicated experiment suites and their reports.
//!
//! Seeds are layered: `master -> suite -> cell (N) -> path`. Each level is a
//! [`derive_seed`](crate::rng::derive_seed) hash, so every number in a
//! report can be traced back to `(cell, replicate)` and is independent of
//! the worker count.

mod annealed;
mod coupling_study;
mod moments;
mod quenched;
pub mod report;

use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::environment::sample_environment;
use crate::error::{Error, Result};
use crate::limit::{annealed_w, observe_limit_pair, TimeGrid};
use crate::model::ModelSpec;
use crate::pdmp::observe_pdmp;
use crate::rng::{self, derive_seed, tag};

pub use annealed::run_annealed_convergence;
pub use coupling_study::{run_coupling_study, study_law as coupling_study_law};
pub use moments::run_moment_tightness_suite;
pub use quenched::run_quenched_control;
pub use report::{ExperimentReport, FitRecord, SeedRecord, Table, Verdict};

#[derive(Debug, Clone, Copy)]
pub(crate) enum Suite {
    Annealed = 0,
    Quenched = 1,
    Coupling = 2,
    Moments = 3,
    Tightness = 4,
}

pub(crate) fn suite_seed(master: u64, suite: Suite) -> u64 {
    derive_seed(master, tag::SWEEP, suite as u64, 0)
}

pub(crate) fn cell_seed(suite_seed: u64, n: usize) -> u64 {
    derive_seed(suite_seed, tag::SWEEP, n as u64, 1)
}

/// Per-path states at the observation times, with running suprema.
#[derive(Debug, Clone, Default)]
pub(crate) struct Ensemble {
    pub rows: Vec<Vec<f64>>,
    pub sups: Vec<f64>,
    pub aborted: usize,
}

/// States and running supremum of one path, `None` if it hit the guard.
type PathResult = Result<Option<(Vec<f64>, f64)>>;

impl Ensemble {
    fn collect(results: Vec<PathResult>) -> Result<Ensemble> {
        let mut e = Ensemble::default();
        for r in results {
            match r? {
                Some((row, sup)) => {
                    e.rows.push(row);
                    e.sups.push(sup);
                }
                None => e.aborted += 1,
            }
        }
        Ok(e)
    }
}

fn absorb_abort<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::AbortedPath { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Particle paths at size `n`. With `frozen = None` every path draws its
/// own environment (annealed); otherwise all paths share `frozen`.
pub(crate) fn pdmp_ensemble(
    model: &ModelSpec,
    n: usize,
    frozen: Option<&[f64]>,
    times: &[f64],
    n_paths: usize,
    cell: u64,
) -> Result<Ensemble> {
    let nn = n as u64;
    let results = crate::par::map_indexed(n_paths, |i| {
        let i = i as u64;
        let owned;
        let values = match frozen {
            Some(v) => v,
            None => {
                owned = sample_environment(model.law, n, derive_seed(cell, tag::ENVIRONMENT, nn, i))?.values;
                &owned[..]
            }
        };
        let x0 = model
            .init_particle
            .sample(n, &mut rng::stream(derive_seed(cell, tag::INIT, nn, i)));
        let mut rng = rng::stream(derive_seed(cell, tag::PDMP, nn, i));
        absorb_abort(observe_pdmp(model, values, x0, times, &mut rng).map(|o| (o.states, o.running_sup)))
    });
    Ensemble::collect(results)
}

/// Limit paths observed at `times` with step `dt` and, on the same noise,
/// with step `dt / 2`. With `w = None` each path draws `W ~ N(0, sigma^2)`.
pub(crate) fn limit_ensemble(
    model: &ModelSpec,
    n: usize,
    w: Option<f64>,
    times: &[f64],
    dt: f64,
    n_paths: usize,
    cell: u64,
) -> Result<(Ensemble, Vec<Vec<f64>>)> {
    let grid = TimeGrid::covering(model.horizon, dt)?;
    let obs = times.iter().map(|t| grid.index_of(*t)).collect::<Result<Vec<_>>>()?;
    let nn = n as u64;
    let results = crate::par::map_indexed(n_paths, |i| {
        let i = i as u64;
        let seed = derive_seed(cell, tag::LIMIT, nn, i);
        let w = w.unwrap_or_else(|| annealed_w(model, seed));
        let x0 = model
            .init_limit
            .sample(n, &mut rng::stream(derive_seed(cell, tag::LIMIT_INIT, nn, i)));
        let mut rng = rng::stream(seed);
        absorb_abort(observe_limit_pair(model, w, x0, &grid, &obs, &mut rng))
    });
    let mut coarse = Ensemble::default();
    let mut fine = Vec::new();
    for r in results {
        match r? {
            Some(o) => {
                coarse.rows.push(o.coarse);
                coarse.sups.push(o.running_sup);
                fine.push(o.fine);
            }
            None => coarse.aborted += 1,
        }
    }
    Ok((coarse, fine))
}

pub(crate) fn abort_verdict(name: &str, aborted: usize, total: usize, max_fraction: f64) -> Verdict {
    let frac = if total == 0 { 0.0 } else { aborted as f64 / total as f64 };
    Verdict::new(
        name,
        frac <= max_fraction,
        frac,
        format!("aborted fraction <= {max_fraction}"),
        format!("{aborted} of {total} paths hit the blowup guard"),
    )
}

/// Runs every enabled suite on a pool of `threads` workers (0 = all cores)
/// and merges the reports.
pub fn run_verify(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    crate::par::with_threads(threads, || {
        let mut report = ExperimentReport::new("verify", &cfg.hash(), cfg.master_seed);
        type Runner = fn(&ExperimentConfig) -> Result<ExperimentReport>;
        let suites: [(&str, bool, Runner); 4] = [
            ("annealed", cfg.suites.annealed, run_annealed_convergence),
            ("quenched", cfg.suites.quenched, run_quenched_control),
            ("coupling", cfg.suites.coupling, run_coupling_study),
            ("moments", cfg.suites.moments, run_moment_tightness_suite),
        ];
        for (name, enabled, run) in suites {
            if !enabled {
                continue;
            }
            let start = Instant::now();
            let mut part = run(cfg)?;
            part.wall_times.insert(name.to_string(), start.elapsed().as_secs_f64());
            report.absorb(part);
        }
        Ok(report)
    })
}
