use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::{fidi_products, gap_of_products, monotone_within_ci, rate_fit, theory_regressor};
use crate::stats;

use super::report::{ExperimentReport, FitRecord, Table, Verdict};
use super::{abort_verdict, cell_seed, limit_ensemble, pdmp_ensemble, suite_seed, Suite};

/// Fidi gap between the particle system, averaged over fresh environments,
/// and the annealed limit, for each `N` of the grid; then the rate fit.
pub fn run_annealed_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let model = &cfg.model;
    let tol = &cfg.tolerances;
    let mut report = ExperimentReport::new("annealed", &cfg.hash(), cfg.master_seed);
    let ss = suite_seed(cfg.master_seed, Suite::Annealed);

    let mut gaps = Table::new("annealed_gaps", &["N", "gap", "se", "kr_init", "theory_regressor"]);
    let mut disc = Table::new(
        "annealed_discretization",
        &["N", "mean_particle", "mean_limit_dt", "mean_limit_half_dt", "dt_bias"],
    );
    let (mut aborted, mut total) = (0, 0);
    for &n in &e.n_grid {
        let cell = cell_seed(ss, n);
        report.seed(format!("annealed/N={n}"), cell);
        let particles = pdmp_ensemble(model, n, None, &e.times, e.n_paths, cell)?;
        let (limit, fine) = limit_ensemble(model, n, None, &e.times, e.dt, e.n_paths, cell)?;
        aborted += particles.aborted + limit.aborted;
        total += 2 * e.n_paths;
        let m = particles.rows.len().min(limit.rows.len());
        let pa = fidi_products(&particles.rows[..m], &e.test_functions)?;
        let pb = fidi_products(&limit.rows[..m], &e.test_functions)?;
        let pf = fidi_products(&fine, &e.test_functions)?;
        let g = gap_of_products(&pa, &pb);
        let kr = model.kr_init(n);
        gaps.push(vec![n as f64, g.gap, g.se, kr, theory_regressor(n as f64, kr)]);
        let mean_fine = stats::mean(&pf);
        disc.push(vec![n as f64, g.mean_a, g.mean_b, mean_fine, g.mean_b - mean_fine]);
    }

    let ns = gaps.column("N").unwrap();
    let gs = gaps.column("gap").unwrap();
    let ses = gaps.column("se").unwrap();
    let krs = gaps.column("kr_init").unwrap();
    let fit = rate_fit(&ns, &gs, &ses, Some(&krs))?;
    report.fits.push(FitRecord {
        name: "annealed".into(),
        c_hat: fit.c_hat,
        loglog_slope: fit.loglog_slope,
        r2: fit.r2,
        degenerate: fit.degenerate,
    });

    let mono = monotone_within_ci(&gs, &ses, tol.ci_z);
    report.verdicts.push(Verdict::new(
        "annealed.monotone",
        mono,
        if mono { 1.0 } else { 0.0 },
        format!("gap(N') <= gap(N) + {} * combined se", tol.ci_z),
        format!("gaps {gs:?}"),
    ));
    let slope_ok = !fit.degenerate
        && fit
            .loglog_slope
            .is_some_and(|s| s >= tol.slope_min && s <= tol.slope_max);
    report.verdicts.push(Verdict::new(
        "annealed.loglog_slope",
        slope_ok,
        fit.loglog_slope.unwrap_or(f64::NAN),
        format!("slope in [{}, {}]", tol.slope_min, tol.slope_max),
        if fit.degenerate {
            "degenerate fit".to_string()
        } else {
            format!("c_hat {}", fit.c_hat)
        },
    ));
    report.verdicts.push(abort_verdict(
        "annealed.aborted_paths",
        aborted,
        total,
        tol.abort_fraction_max,
    ));
    report.tables.push(gaps);
    report.tables.push(disc);
    Ok(report)
}
