//! Numerical helpers shared by the simulators and the harness.

use statrs::function::erf;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() - 1) as f64
}

/// Mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let se = (variance(xs) / xs.len() as f64).sqrt();
    (m, se)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated empirical quantile.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail 1 - Phi(x), accurate for large x.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Quantile from a lower/upper tail pair `(p, 1 - p)`; picks the tail with
/// more resolution.
pub fn normal_quantile_tails(lower: f64, upper: f64) -> f64 {
    if lower <= upper {
        normal_quantile(lower)
    } else {
        -normal_quantile(upper)
    }
}

/// Kolmogorov–Smirnov statistic of a sample against a continuous cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical coefficient at level 1%.
pub const KS_C_1PCT: f64 = 1.627_6;

pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_C_1PCT / (n as f64).sqrt()
}

pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    KS_C_1PCT * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Weighted least squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw = compensated_sum((0..xs.len()).map(w));
    let mx = compensated_sum((0..xs.len()).map(|i| w(i) * xs[i])) / sw;
    let my = compensated_sum((0..xs.len()).map(|i| w(i) * ys[i])) / sw;
    let sxx = compensated_sum((0..xs.len()).map(|i| w(i) * (xs[i] - mx).powi(2)));
    let sxy = compensated_sum((0..xs.len()).map(|i| w(i) * (xs[i] - mx) * (ys[i] - my)));
    let syy = compensated_sum((0..xs.len()).map(|i| w(i) * (ys[i] - my).powi(2)));
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Some(LineFit { slope, intercept, r2 })
}

/// ln C(n, k).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}
