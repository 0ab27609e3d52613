use crate::config::ExperimentConfig;
use crate::coupling::{k_samples, tail_profile_from_samples, CouplerKind};
use crate::environment::DisorderLaw;
use crate::error::Result;
use crate::rng::{derive_seed, tag};
use crate::stats;

use super::report::{ExperimentReport, Table, Verdict};
use super::{suite_seed, Suite};

/// Disorder law each coupler is studied on: the exact coupler needs Gaussian
/// variables of the model's variance, the dyadic one Rademacher signs.
pub fn study_law(kind: CouplerKind, model_law: DisorderLaw) -> DisorderLaw {
    match kind {
        CouplerKind::ExactGaussian => DisorderLaw::GaussianCentered { std: model_law.sigma() },
        CouplerKind::DyadicKmt => DisorderLaw::Rademacher,
        CouplerKind::NaiveQuantile => model_law,
    }
}

/// Distribution of `K` per coupler over `N = 2^j`, with tail fits.
pub fn run_coupling_study(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let c = &cfg.coupling;
    let tol = &cfg.tolerances;
    let mut report = ExperimentReport::new("coupling", &cfg.hash(), cfg.master_seed);
    let ss = suite_seed(cfg.master_seed, Suite::Coupling);

    for (ki, &kind) in c.couplers.iter().enumerate() {
        let law = study_law(kind, cfg.model.law);
        let mut summary = Table::new(
            format!("k_summary_{}", kind.name()),
            &[
                "N",
                "median",
                "q90",
                "max",
                "gamma_hat",
                "lambda_hat",
                "r2",
                "degenerate",
            ],
        );
        let mut medians = Vec::new();
        let mut r2s = Vec::new();
        let mut kmax: f64 = 0.0;
        let mut last_profile = None;
        for j in c.n_log2_min..=c.n_log2_max {
            let n = 1usize << j;
            let seed = derive_seed(ss, tag::COUPLING, n as u64, ki as u64);
            report.seed(format!("coupling/{}/N={n}", kind.name()), seed);
            let ks = k_samples(kind, law, n, c.replicates, seed)?;
            let prof = tail_profile_from_samples(kind, n, ks);
            let med = stats::median(&prof.k_values);
            let top = prof.k_values.iter().copied().fold(0.0, f64::max);
            summary.push(vec![
                n as f64,
                med,
                stats::quantile(&prof.k_values, 0.9),
                top,
                prof.gamma_hat,
                prof.lambda_hat,
                prof.r2,
                if prof.degenerate { 1.0 } else { 0.0 },
            ]);
            medians.push(med);
            r2s.push(if prof.degenerate { 0.0 } else { prof.r2 });
            kmax = kmax.max(top);
            last_profile = Some(prof);
        }
        if let Some(prof) = last_profile {
            let mut tail = Table::new(format!("k_tail_{}", kind.name()), &["x", "tail_freq"]);
            for (x, p) in prof.x_grid.iter().zip(&prof.tail_freq) {
                tail.push(vec![*x, *p]);
            }
            report.tables.push(tail);
        }
        report.tables.push(summary);

        match kind {
            CouplerKind::ExactGaussian => report.verdicts.push(Verdict::new(
                "coupling.exact_gaussian_zero",
                kmax == 0.0,
                kmax,
                "K = 0 for every replicate",
                "",
            )),
            CouplerKind::DyadicKmt => {
                let hi = medians.iter().copied().fold(f64::MIN, f64::max);
                let lo = medians.iter().copied().fold(f64::MAX, f64::min);
                let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
                report.verdicts.push(Verdict::new(
                    "coupling.dyadic_median_bounded",
                    ratio < tol.k_median_ratio_max,
                    ratio,
                    format!("max/min of median K across N < {}", tol.k_median_ratio_max),
                    format!("medians {medians:?}"),
                ));
                // one fit, at the largest N of the grid; the others are in the table
                let r2 = *r2s.last().unwrap();
                report.verdicts.push(Verdict::new(
                    "coupling.dyadic_tail_r2",
                    r2 >= tol.tail_r2_min,
                    r2,
                    format!(
                        "log-linear tail fit r2 >= {} at N = 2^{}",
                        tol.tail_r2_min, c.n_log2_max
                    ),
                    format!("r2 per N {r2s:?}"),
                ));
            }
            CouplerKind::NaiveQuantile => {
                let first = medians[0];
                let last = *medians.last().unwrap();
                let growth = if first > 0.0 { last / first } else { f64::INFINITY };
                report.verdicts.push(Verdict::new(
                    "coupling.naive_growth",
                    growth > tol.naive_growth_min,
                    growth,
                    format!(
                        "median K at the largest N > {} x median at the smallest",
                        tol.naive_growth_min
                    ),
                    format!("medians {medians:?}"),
                ));
            }
        }
    }
    Ok(report)
}
