use crate::config::ExperimentConfig;
use crate::coupling::couple;
use crate::error::Result;
use crate::metrics::{fidi_products, gap_of_products};
use crate::rng::{derive_seed, tag};
use crate::stats;

use super::report::{ExperimentReport, Table, Verdict};
use super::{abort_verdict, cell_seed, limit_ensemble, pdmp_ensemble, suite_seed, Suite};

/// One frozen coupled environment, shared by prefix across the `N` grid.
/// Compares the particle system given `U^[N]` with the limit given `W^[N]`.
pub fn run_quenched_control(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let q = &cfg.quenched;
    let model = &cfg.model;
    let tol = &cfg.tolerances;
    let mut report = ExperimentReport::new("quenched", &cfg.hash(), cfg.master_seed);
    let ss = suite_seed(cfg.master_seed, Suite::Quenched);

    let n_max = *q.n_grid.last().expect("validated grid");
    let coupling_seed = derive_seed(ss, tag::COUPLING, n_max as u64, 0);
    report.seed(format!("quenched/coupling/N={n_max}"), coupling_seed);
    let full = couple(e.coupler, model.law, n_max, coupling_seed)?;
    let sigma = model.law.sigma();

    let mut gaps = Table::new(
        "quenched_gaps",
        &["N", "gap", "se", "w", "s_n", "k_stat", "mean_particle", "mean_limit"],
    );
    let mut scaled = Table::new("quenched_scaled", &["N", "c", "scaled_gap"]);
    let lambda = model.is_constant_rate_pure_jump();
    let mut identity = Table::new(
        "quenched_mean_identity",
        &["N", "t", "mean_gap", "bound", "discrepancy_over_ln_n", "k_stat"],
    );
    let mut identity_ok = true;
    let mut worst_ratio: f64 = 0.0;
    let (mut aborted, mut total) = (0, 0);
    let mut last_particles = None;
    for &n in &q.n_grid {
        let env = full.prefix(n);
        let cell = cell_seed(ss, n);
        report.seed(format!("quenched/N={n}"), cell);
        let particles = pdmp_ensemble(model, n, Some(&env.draw.values), &e.times, q.n_paths, cell)?;
        let (limit, _) = limit_ensemble(model, n, Some(env.w()), &e.times, e.dt, q.n_paths, cell)?;
        aborted += particles.aborted + limit.aborted;
        total += 2 * q.n_paths;
        let m = particles.rows.len().min(limit.rows.len());
        let pa = fidi_products(&particles.rows[..m], &e.test_functions)?;
        let pb = fidi_products(&limit.rows[..m], &e.test_functions)?;
        let g = gap_of_products(&pa, &pb);
        gaps.push(vec![
            n as f64,
            g.gap,
            g.se,
            env.w(),
            env.draw.s_n(),
            env.k_stat,
            g.mean_a,
            g.mean_b,
        ]);
        let nf = n as f64;
        for &c in &q.c_grid {
            scaled.push(vec![nf, c, g.gap * nf.sqrt() / nf.ln().powf(c)]);
        }

        if let (Some(lambda), true) = (lambda, n >= 2) {
            // E[X^N_t | U] - E[X(W^[N])_t | W^[N]] = lambda t (S_N - W^[N])
            let d_n = *env.discrepancies().last().unwrap();
            let per_log = d_n / nf.ln();
            let exact = per_log <= env.k_stat;
            for &t in &e.times {
                let mean_gap = lambda * t * (env.draw.s_n() - env.w()).abs();
                let bound = lambda * t * env.k_stat * nf.ln() / nf.sqrt();
                // both sides carry a few roundings; the exact comparison is per_log <= K
                let scaled_ok = mean_gap <= bound * (1.0 + 1e-12) + f64::MIN_POSITIVE;
                identity_ok &= exact && scaled_ok;
                if bound > 0.0 {
                    worst_ratio = worst_ratio.max(mean_gap / bound);
                }
                identity.push(vec![nf, t, mean_gap, bound, per_log, env.k_stat]);
            }
        }
        last_particles = Some((n, env.w(), pa));
    }

    // boundedness frontier of gap sqrt(N) / (ln N)^c
    let mut frontier = Table::new("quenched_frontier", &["c", "loglog_slope", "bounded"]);
    let ln_n: Vec<f64> = q.n_grid.iter().map(|n| (*n as f64).ln()).collect();
    for &c in &q.c_grid {
        let ys: Vec<f64> = scaled.rows.iter().filter(|r| r[1] == c).map(|r| r[2]).collect();
        let slope = if ys.iter().all(|y| *y > 0.0) && ys.len() >= 2 {
            let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
            stats::fit_line(&ln_n, &ly, None).map(|f| f.slope)
        } else {
            None
        };
        let bounded = slope.is_some_and(|s| s <= 0.1);
        frontier.push(vec![c, slope.unwrap_or(0.0), if bounded { 1.0 } else { 0.0 }]);
    }

    // environment dependence at the largest N: quenched particle mean against
    // the annealed limit mean
    if let Some((n, w, pa)) = last_particles {
        let cell = derive_seed(cell_seed(ss, n), tag::ANNEALED_W, n as u64, 0);
        report.seed(format!("quenched/annealed_reference/N={n}"), cell);
        let (annealed, _) = limit_ensemble(model, n, None, &e.times, e.dt, q.n_paths, cell)?;
        let pb = fidi_products(&annealed.rows, &e.test_functions)?;
        let g = gap_of_products(&pa, &pb);
        let mut dep = Table::new(
            "quenched_environment_dependence",
            &[
                "N",
                "w_over_sigma",
                "quenched_mean",
                "annealed_mean",
                "difference",
                "se",
            ],
        );
        dep.push(vec![n as f64, w / sigma, g.mean_a, g.mean_b, g.mean_a - g.mean_b, g.se]);
        report.tables.push(dep);
    }

    if lambda.is_some() {
        report.verdicts.push(Verdict::new(
            "quenched.mean_identity",
            identity_ok,
            worst_ratio,
            "lambda t |S_N - W^[N]| <= lambda t K ln N / sqrt N at every N and t",
            "value is the largest ratio of the two sides",
        ));
    }
    report.verdicts.push(abort_verdict(
        "quenched.aborted_paths",
        aborted,
        total,
        tol.abort_fraction_max,
    ));
    report.tables.push(gaps);
    report.tables.push(scaled);
    report.tables.push(frontier);
    if lambda.is_some() {
        report.tables.push(identity);
    }
    Ok(report)
}
