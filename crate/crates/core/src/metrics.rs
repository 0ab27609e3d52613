//! Empirical distances and ensemble statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::TestFunction;
use crate::pdmp::{path_value_at, PdmpPath};
use crate::stats::{self, compensated_sum};

/// Kantorovich–Rubinstein distance between two empirical measures of equal
/// size: the mean absolute difference of order statistics.
pub fn w1_empirical(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::SizeMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(compensated_sum(a.iter().zip(&b).map(|(x, y)| (x - y).abs())) / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidiGap {
    pub gap: f64,
    pub se: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// `prod_i g_i(row_i)` for each row.
pub fn fidi_products(rows: &[Vec<f64>], gs: &[TestFunction]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|row| {
            if row.len() != gs.len() {
                return Err(Error::SizeMismatch {
                    left: row.len(),
                    right: gs.len(),
                });
            }
            Ok(row.iter().zip(gs).map(|(x, g)| g.value(*x)).product())
        })
        .collect()
}

/// `|mean_A prod g_i(X_{t_i}) - mean_B prod g_i(Y_{t_i})|` for path samples
/// given as rows of states at the common times. The two ensembles are
/// independent, so the standard error adds the two variances.
pub fn fidi_gap(a: &[Vec<f64>], b: &[Vec<f64>], gs: &[TestFunction]) -> Result<FidiGap> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if gs.is_empty() {
        return Err(Error::param("fidi gap needs at least one test function"));
    }
    let pa = fidi_products(a, gs)?;
    let pb = fidi_products(b, gs)?;
    Ok(gap_of_products(&pa, &pb))
}

pub(crate) fn gap_of_products(pa: &[f64], pb: &[f64]) -> FidiGap {
    let (ma, sa) = stats::mean_se(pa);
    let (mb, sb) = stats::mean_se(pb);
    FidiGap {
        gap: (ma - mb).abs(),
        se: (sa * sa + sb * sb).sqrt(),
        mean_a: ma,
        mean_b: mb,
    }
}

/// Mean of `(x_s - x_r)^2 (x_t - x_s)^2` over triples.
pub fn tightness_from_triples(triples: &[[f64; 3]]) -> f64 {
    stats::mean(
        &triples
            .iter()
            .map(|[r, s, t]| (s - r).powi(2) * (t - s).powi(2))
            .collect::<Vec<_>>(),
    )
}

pub fn tightness_stat(paths: &[PdmpPath], r: f64, s: f64, t: f64) -> Result<f64> {
    if !(r <= s && s <= t) {
        return Err(Error::param(format!("need r <= s <= t, got {r}, {s}, {t}")));
    }
    let triples = paths
        .iter()
        .map(|p| Ok([path_value_at(p, r)?, path_value_at(p, s)?, path_value_at(p, t)?]))
        .collect::<Result<Vec<_>>>()?;
    Ok(tightness_from_triples(&triples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    /// `E[X_t^{2p}]` per grid time.
    pub moments: Vec<f64>,
    pub moment_se: Vec<f64>,
    /// `E[sup_t |X_t|^kappa]`.
    pub sup_moment: f64,
    pub sup_moment_se: f64,
}

/// Moment profile from per-path states on a time grid and per-path running
/// suprema of `|X|`.
pub fn moment_profile_from_samples(
    states: &[Vec<f64>],
    running_sup: &[f64],
    p: u32,
    kappa: f64,
) -> Result<MomentProfile> {
    if states.len() != running_sup.len() || states.is_empty() {
        return Err(Error::SizeMismatch {
            left: states.len(),
            right: running_sup.len(),
        });
    }
    let k = states[0].len();
    let mut moments = Vec::with_capacity(k);
    let mut moment_se = Vec::with_capacity(k);
    for i in 0..k {
        let col: Vec<f64> = states.iter().map(|row| row[i].powi(2 * p as i32)).collect();
        let (m, se) = stats::mean_se(&col);
        moments.push(m);
        moment_se.push(se);
    }
    let sups: Vec<f64> = running_sup.iter().map(|s| s.abs().powf(kappa)).collect();
    let (sup_moment, sup_moment_se) = stats::mean_se(&sups);
    Ok(MomentProfile {
        moments,
        moment_se,
        sup_moment,
        sup_moment_se,
    })
}

/// Moment profile of stored paths; the running supremum is taken over event
/// endpoints, where a monotone flow attains it.
pub fn moment_profile(paths: &[PdmpPath], p: u32, kappa: f64, times: &[f64]) -> Result<MomentProfile> {
    let states = paths
        .iter()
        .map(|path| {
            times
                .iter()
                .map(|t| path_value_at(path, *t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let sups: Vec<f64> = paths
        .iter()
        .map(|path| {
            let end = path.drift.flow(
                path.events.last().map_or(path.x0, |e| e.post_state),
                path.horizon - path.events.last().map_or(path.t0, |e| e.time),
            );
            path.events.iter().fold(path.x0.abs().max(end.abs()), |m, e| {
                m.max(e.pre_state.abs()).max(e.post_state.abs())
            })
        })
        .collect();
    moment_profile_from_samples(&states, &sups, p, kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Weighted least-squares coefficient of `gap = c (kr_init + ln N / sqrt N)`.
    pub c_hat: f64,
    /// Slope of `ln gap` against `ln N`, over positive gaps.
    pub loglog_slope: Option<f64>,
    /// Coefficient of determination of the log-log fit.
    pub r2: Option<f64>,
    pub residuals: Vec<f64>,
    pub degenerate: bool,
}

/// `ln N / sqrt N`, plus the initial-law distance when given.
pub fn theory_regressor(n: f64, kr_init: f64) -> f64 {
    kr_init + n.ln() / n.sqrt()
}

pub fn rate_fit(n_values: &[f64], gaps: &[f64], ses: &[f64], kr_init: Option<&[f64]>) -> Result<RateFit> {
    let m = n_values.len();
    if gaps.len() != m || ses.len() != m {
        return Err(Error::SizeMismatch {
            left: m,
            right: gaps.len().min(ses.len()),
        });
    }
    if let Some(kr) = kr_init {
        if kr.len() != m {
            return Err(Error::SizeMismatch {
                left: m,
                right: kr.len(),
            });
        }
    }
    let x: Vec<f64> = (0..m)
        .map(|i| theory_regressor(n_values[i], kr_init.map_or(0.0, |k| k[i])))
        .collect();
    // weights 1/se^2 when every se is positive, uniform otherwise
    let w: Vec<f64> = if ses.iter().all(|s| *s > 0.0) {
        ses.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; m]
    };
    let sxy = compensated_sum((0..m).map(|i| w[i] * x[i] * gaps[i]));
    let sxx = compensated_sum((0..m).map(|i| w[i] * x[i] * x[i]));
    let c_hat = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let residuals = (0..m).map(|i| gaps[i] - c_hat * x[i]).collect();

    let (lx, ly): (Vec<f64>, Vec<f64>) = (0..m)
        .filter(|&i| gaps[i] > 0.0 && n_values[i] > 0.0)
        .map(|i| (n_values[i].ln(), gaps[i].ln()))
        .unzip();
    let fit = if lx.len() >= 2 {
        stats::fit_line(&lx, &ly, None)
    } else {
        None
    };
    Ok(RateFit {
        c_hat,
        loglog_slope: fit.map(|f| f.slope),
        r2: fit.map(|f| f.r2),
        residuals,
        degenerate: m < 3 || lx.len() < 3,
    })
}

/// Whether each gap exceeds its predecessor by no more than `z` combined
/// standard errors.
pub fn monotone_within_ci(gaps: &[f64], ses: &[f64], z: f64) -> bool {
    gaps.windows(2)
        .zip(ses.windows(2))
        .all(|(g, s)| g[1] <= g[0] + z * (s[0] * s[0] + s[1] * s[1]).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Drift;

    #[test]
    fn w1_hand_cases() {
        assert_eq!(w1_empirical(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 1.0);
        assert!((w1_empirical(&[0.0, 0.0, 3.0], &[1.0, 1.0, 1.0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(w1_empirical(&[0.5, -1.0], &[-1.0, 0.5]).unwrap(), 0.0);
        assert!(w1_empirical(&[1.0], &[1.0, 2.0]).is_err());
        assert!(w1_empirical(&[], &[]).is_err());
    }

    #[test]
    fn fidi_identical_and_bounded() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1 - 2.0]).collect();
        let g = [TestFunction::TanhWave { a: 1.0, k: 1.0 }];
        assert_eq!(fidi_gap(&rows, &rows, &g).unwrap().gap, 0.0);
        let other: Vec<Vec<f64>> = rows.iter().map(|r| vec![-r[0] * 10.0]).collect();
        assert!(fidi_gap(&rows, &other, &g).unwrap().gap <= 2.0);
        assert!(fidi_gap(&rows, &rows[..10], &g).is_err());
        assert!(fidi_gap(&rows, &rows, &[]).is_err());
    }

    #[test]
    fn tightness_zero_when_times_coincide() {
        let path = PdmpPath {
            t0: 0.0,
            x0: 1.0,
            horizon: 1.0,
            drift: Drift::Linear { alpha: 1.0, c: 0.0 },
            events: vec![],
            seed: 0,
        };
        assert_eq!(tightness_stat(std::slice::from_ref(&path), 0.5, 0.5, 0.5).unwrap(), 0.0);
        let (r, s, t) = (0.1f64, 0.3f64, 0.6f64);
        let expect = ((-s).exp() - (-r).exp()).powi(2) * ((-t).exp() - (-s).exp()).powi(2);
        let got = tightness_stat(&[path], r, s, t).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn deterministic_moment_profile() {
        let path = PdmpPath {
            t0: 0.0,
            x0: 2.0,
            horizon: 1.0,
            drift: Drift::Linear { alpha: 1.0, c: 0.0 },
            events: vec![],
            seed: 0,
        };
        let prof = moment_profile(&[path], 2, 2.0, &[0.0, 0.5, 1.0]).unwrap();
        for (m, t) in prof.moments.iter().zip([0.0f64, 0.5, 1.0]) {
            assert!((m - (2.0 * (-t).exp()).powi(4)).abs() < 1e-12);
        }
        assert_eq!(prof.sup_moment, 4.0);
    }

    #[test]
    fn rate_fit_exact_models() {
        let ns = [64.0, 256.0, 1024.0, 4096.0];
        let gaps: Vec<f64> = ns.iter().map(|n: &f64| 0.7 * n.ln() / n.sqrt()).collect();
        let fit = rate_fit(&ns, &gaps, &[0.01; 4], None).unwrap();
        assert!((fit.c_hat - 0.7).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-14));
        assert!(!fit.degenerate);

        let gaps: Vec<f64> = ns.iter().map(|n: &f64| 3.0 / n.sqrt()).collect();
        let fit = rate_fit(&ns, &gaps, &[0.01; 4], None).unwrap();
        assert!((fit.loglog_slope.unwrap() + 0.5).abs() < 1e-12);

        let fit = rate_fit(&ns, &[0.1; 4], &[0.01; 4], None).unwrap();
        assert!(fit.loglog_slope.unwrap().abs() < 1e-12);
        assert!(fit.residuals.iter().map(|r| r.abs()).fold(0.0, f64::max) > 0.01);

        let fit = rate_fit(&ns[..1], &[0.1], &[0.01], None).unwrap();
        assert!(fit.degenerate);
        let fit = rate_fit(&ns, &[0.0; 4], &[0.0; 4], None).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.loglog_slope, None);
    }

    #[test]
    fn kr_regressor_enters_fit() {
        let ns = [64.0, 256.0, 1024.0];
        let kr = [0.1, 0.05, 0.025];
        let gaps: Vec<f64> = (0..3).map(|i| 2.0 * theory_regressor(ns[i], kr[i])).collect();
        let fit = rate_fit(&ns, &gaps, &[1.0; 3], Some(&kr)).unwrap();
        assert!((fit.c_hat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_check() {
        assert!(monotone_within_ci(&[0.3, 0.2, 0.21], &[0.01; 3], 2.0));
        assert!(!monotone_within_ci(&[0.3, 0.2, 0.3], &[0.01; 3], 2.0));
    }
}
