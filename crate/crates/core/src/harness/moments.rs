use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::moment_profile_from_samples;
use crate::stats;

use super::report::{ExperimentReport, FitRecord, Table, Verdict};
use super::{abort_verdict, cell_seed, pdmp_ensemble, suite_seed, Suite};

/// Moment profiles across the `N` grid and the increment-product statistic
/// over dyadic windows, both on annealed particle ensembles.
pub fn run_moment_tightness_suite(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mo = &cfg.moments;
    let ti = &cfg.tightness;
    let model = &cfg.model;
    let tol = &cfg.tolerances;
    let mut report = ExperimentReport::new("moments", &cfg.hash(), cfg.master_seed);
    let (mut aborted, mut total) = (0, 0);

    let ss = suite_seed(cfg.master_seed, Suite::Moments);
    let grid: Vec<f64> = (0..mo.grid_points)
        .map(|i| model.horizon * i as f64 / (mo.grid_points - 1) as f64)
        .collect();
    let mut profile = Table::new("moment_profile", &["N", "t", "moment", "se"]);
    let mut summary = Table::new("moment_summary", &["N", "max_moment", "sup_moment", "sup_moment_se"]);
    for &n in &mo.n_grid {
        let cell = cell_seed(ss, n);
        report.seed(format!("moments/N={n}"), cell);
        let ens = pdmp_ensemble(model, n, None, &grid, mo.n_paths, cell)?;
        aborted += ens.aborted;
        total += mo.n_paths;
        let prof = moment_profile_from_samples(&ens.rows, &ens.sups, mo.p, mo.kappa)?;
        for ((t, m), se) in grid.iter().zip(&prof.moments).zip(&prof.moment_se) {
            profile.push(vec![n as f64, *t, *m, *se]);
        }
        let max_moment = prof.moments.iter().copied().fold(0.0, f64::max);
        summary.push(vec![n as f64, max_moment, prof.sup_moment, prof.sup_moment_se]);
    }
    let maxes = summary.column("max_moment").unwrap();
    let sups = summary.column("sup_moment").unwrap();
    let hi = maxes.iter().copied().fold(f64::MIN, f64::max);
    let lo = maxes.iter().copied().fold(f64::MAX, f64::min);
    let ratio = if hi == 0.0 { 1.0 } else { hi / lo };
    report.verdicts.push(Verdict::new(
        "moments.uniform_in_n",
        ratio.is_finite() && ratio < tol.moment_ratio_max,
        ratio,
        format!("max/min over N of sup_t E[X_t^{}] < {}", 2 * mo.p, tol.moment_ratio_max),
        "",
    ));
    let finite = sups.iter().all(|s| s.is_finite());
    report.verdicts.push(Verdict::new(
        "moments.running_sup_finite",
        finite,
        sups.iter().copied().fold(0.0, f64::max),
        format!("E[sup_t |X_t|^{}] finite at every N", mo.kappa),
        "",
    ));

    // increments over [r, s] and [s, t] with t - r = 2^-j and s the midpoint
    let ts = suite_seed(cfg.master_seed, Suite::Tightness);
    let cell = cell_seed(ts, ti.n);
    report.seed(format!("tightness/N={}", ti.n), cell);
    let spans: Vec<f64> = ti.span_log2.iter().map(|j| 0.5f64.powi(*j as i32)).collect();
    let mut times: Vec<f64> = spans.iter().flat_map(|h| [ti.r, ti.r + 0.5 * h, ti.r + h]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let ens = pdmp_ensemble(model, ti.n, None, &times, ti.n_paths, cell)?;
    aborted += ens.aborted;
    total += ti.n_paths;
    let at = |t: f64| times.iter().position(|x| *x == t).expect("observation time");
    let mut tight = Table::new("tightness", &["span", "stat", "se"]);
    for h in &spans {
        let (ir, is, it) = (at(ti.r), at(ti.r + 0.5 * h), at(ti.r + h));
        let prods: Vec<f64> = ens
            .rows
            .iter()
            .map(|row| (row[is] - row[ir]).powi(2) * (row[it] - row[is]).powi(2))
            .collect();
        let (m, se) = stats::mean_se(&prods);
        tight.push(vec![*h, m, se]);
    }
    let stat = tight.column("stat").unwrap();
    let degenerate = stat.iter().any(|s| *s <= 0.0);
    let fit = if degenerate {
        None
    } else {
        let lx: Vec<f64> = spans.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = stat.iter().map(|s| s.ln()).collect();
        stats::fit_line(&lx, &ly, None)
    };
    report.fits.push(FitRecord {
        name: "tightness".into(),
        c_hat: fit.map_or(0.0, |f| f.intercept.exp()),
        loglog_slope: fit.map(|f| f.slope),
        r2: fit.map(|f| f.r2),
        degenerate: fit.is_none(),
    });
    let exponent = fit.map_or(f64::NAN, |f| f.slope);
    report.verdicts.push(Verdict::new(
        "tightness.exponent",
        exponent >= tol.tightness_exponent_min,
        exponent,
        format!("regression exponent >= {}", tol.tightness_exponent_min),
        if degenerate {
            "degenerate: some window statistic is zero".to_string()
        } else {
            String::new()
        },
    ));
    report.verdicts.push(abort_verdict(
        "moments.aborted_paths",
        aborted,
        total,
        tol.abort_fraction_max,
    ));
    report.tables.push(profile);
    report.tables.push(summary);
    report.tables.push(tight);
    Ok(report)
}
