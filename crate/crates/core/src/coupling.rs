//! Couplings between the disorder partial sums and a Brownian motion `beta`
//! sampled at integer times, and the coupling constant
//! `K = max_{2 <= n <= N} |sum_{j<=n} U_j - sigma beta_n| / ln n`.
//!
//! Three couplers are provided:
//!
//! * [`couple_exact_gaussian`]: Gaussian disorder only, `beta_n = sum U_j / sigma`
//!   so the discrepancy vanishes.
//! * [`couple_naive_quantile`]: per-step quantile matching of the increments.
//!   Both marginals are exact but the error is itself a random walk, so `K`
//!   grows like `sqrt(N) / ln N`.
//! * [`couple_kmt_dyadic`]: Rademacher disorder, built top-down on the dyadic
//!   tree. The walk total is the binomial quantile of the Brownian endpoint
//!   and every block is split by the conditional (hypergeometric) quantile of
//!   its left half, driven by the same normal that places the Brownian bridge
//!   midpoint.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::environment::{sample_environment, DisorderLaw, EnvironmentDraw};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{self, CompensatedSum};

pub const MAX_DYADIC_LOG2: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CouplerKind {
    ExactGaussian,
    NaiveQuantile,
    DyadicKmt,
}

impl CouplerKind {
    pub const ALL: [CouplerKind; 3] = [
        CouplerKind::ExactGaussian,
        CouplerKind::NaiveQuantile,
        CouplerKind::DyadicKmt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CouplerKind::ExactGaussian => "exact-gaussian",
            CouplerKind::NaiveQuantile => "naive-quantile",
            CouplerKind::DyadicKmt => "dyadic-kmt",
        }
    }

    pub fn supports(&self, law: &DisorderLaw) -> bool {
        match self {
            CouplerKind::ExactGaussian => law.is_gaussian(),
            CouplerKind::NaiveQuantile => true,
            CouplerKind::DyadicKmt => matches!(law, DisorderLaw::Rademacher),
        }
    }
}

impl fmt::Display for CouplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CouplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CouplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown coupler `{s}`")))
    }
}

impl From<CouplerKind> for String {
    fn from(k: CouplerKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for CouplerKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Disorder variables together with a Brownian motion at integer times.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledEnvironment {
    pub draw: EnvironmentDraw,
    /// `beta_1, ..., beta_N`.
    pub beta: Vec<f64>,
    /// `W^[n] = sigma beta_n / sqrt(n)` for `n = 1..N`.
    pub w_series: Vec<f64>,
    pub k_stat: f64,
    pub coupler: CouplerKind,
}

impl CoupledEnvironment {
    fn assemble(draw: EnvironmentDraw, beta: Vec<f64>, coupler: CouplerKind) -> Self {
        let sigma = draw.law.sigma();
        let w_series = beta
            .iter()
            .enumerate()
            .map(|(i, b)| sigma * b / ((i + 1) as f64).sqrt())
            .collect();
        let mut env = CoupledEnvironment {
            draw,
            beta,
            w_series,
            k_stat: 0.0,
            coupler,
        };
        env.k_stat = k_statistic(&env);
        env
    }

    pub fn n(&self) -> usize {
        self.draw.n()
    }

    /// `W^[N]` for the full environment.
    pub fn w(&self) -> f64 {
        *self.w_series.last().expect("coupled environment is nonempty")
    }

    /// The first `n` variables, the Brownian values up to time `n`, and `K`
    /// recomputed over `2..=n`.
    pub fn prefix(&self, n: usize) -> CoupledEnvironment {
        let n = n.min(self.n());
        CoupledEnvironment::assemble(self.draw.prefix(n), self.beta[..n].to_vec(), self.coupler)
    }

    /// `|sum_{j<=n} U_j - sigma beta_n|` for `n = 1..N`.
    pub fn discrepancies(&self) -> Vec<f64> {
        if self.coupler == CouplerKind::ExactGaussian {
            return vec![0.0; self.n()];
        }
        let sigma = self.draw.law.sigma();
        let mut acc = CompensatedSum::new();
        self.draw
            .values
            .iter()
            .zip(&self.beta)
            .map(|(u, b)| {
                acc.add(*u);
                (acc.value() - sigma * b).abs()
            })
            .collect()
    }
}

/// `max_{2<=n<=N} |sum_{j<=n} U_j - sigma beta_n| / ln n`; zero when `N < 2`
/// and for the exact Gaussian coupler, whose discrepancy vanishes identically.
pub fn k_statistic(env: &CoupledEnvironment) -> f64 {
    env.discrepancies()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, d)| d / ((i + 1) as f64).ln())
        .fold(0.0, f64::max)
}

fn cumulative(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    values
        .map(|x| {
            acc.add(x);
            acc.value()
        })
        .collect()
}

pub fn couple_exact_gaussian(draw: &EnvironmentDraw) -> Result<CoupledEnvironment> {
    if !draw.law.is_gaussian() {
        return Err(Error::UnsupportedCoupler {
            coupler: CouplerKind::ExactGaussian.name(),
            law: draw.law.to_string(),
        });
    }
    let sigma = draw.law.sigma();
    let beta = cumulative(draw.values.iter().map(|u| u / sigma));
    Ok(CoupledEnvironment::assemble(
        draw.clone(),
        beta,
        CouplerKind::ExactGaussian,
    ))
}

/// Standard normal increment matched to `u` through the distributional
/// transform randomized by `v` at atoms.
pub fn quantile_increment(law: &DisorderLaw, u: f64, v: f64) -> f64 {
    if let DisorderLaw::GaussianCentered { std } = law {
        return u / std;
    }
    let (p, q) = law.distributional_transform(u, v);
    stats::normal_quantile_tails(p, q)
}

pub fn couple_naive_quantile(draw: &EnvironmentDraw, seed: u64) -> CoupledEnvironment {
    let mut rng = rng::stream(rng::derive_seed(seed, rng::tag::COUPLING, draw.n() as u64, 0));
    let increments: Vec<f64> = draw
        .values
        .iter()
        .map(|&u| {
            let v = rng::open01(rng.random());
            quantile_increment(&draw.law, u, v)
        })
        .collect();
    let beta = cumulative(increments.into_iter());
    CoupledEnvironment::assemble(draw.clone(), beta, CouplerKind::NaiveQuantile)
}

/// `log2(n)` if `n` is a power of two.
pub fn exact_log2(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::param(format!("dyadic coupling needs N a power of two, got {n}")));
    }
    Ok(n.trailing_zeros())
}

/// Smallest support point `l` with `F(l) >= u`, for an unnormalized pmf given
/// by a start point and the successive ratios `P(l + 1) / P(l)`.
///
/// `u` is passed as the pair `(u, 1 - u)`; the scan runs from the tail with
/// the smaller mass so both ends keep full resolution.
pub(crate) struct DiscreteQuantile {
    weights: Vec<f64>,
}

const WEIGHT_FLOOR: f64 = 1e-300;

impl DiscreteQuantile {
    pub(crate) fn new() -> Self {
        Self { weights: Vec::new() }
    }

    pub(crate) fn quantile(
        &mut self,
        lo: u64,
        hi: u64,
        start: u64,
        ratio: impl Fn(u64) -> f64,
        lower: f64,
        upper: f64,
    ) -> u64 {
        debug_assert!(lo <= start && start <= hi);
        if lo == hi {
            return lo;
        }
        // weights left of start, collected in reverse
        let mut left = Vec::new();
        let mut w = 1.0;
        let mut l = start;
        while l > lo {
            w /= ratio(l - 1);
            if w < WEIGHT_FLOOR {
                break;
            }
            left.push(w);
            l -= 1;
        }
        let first = l;
        self.weights.clear();
        self.weights.extend(left.iter().rev());
        self.weights.push(1.0);
        let mut w = 1.0;
        let mut l = start;
        while l < hi {
            w *= ratio(l);
            if w < WEIGHT_FLOOR {
                break;
            }
            self.weights.push(w);
            l += 1;
        }
        let total = stats::compensated_sum(self.weights.iter().copied());
        if lower <= upper {
            let target = lower * total;
            let mut acc = CompensatedSum::new();
            for (i, w) in self.weights.iter().enumerate() {
                acc.add(*w);
                if acc.value() >= target {
                    return first + i as u64;
                }
            }
            first + self.weights.len() as u64 - 1
        } else {
            let target = upper * total;
            let mut acc = CompensatedSum::new();
            let last = self.weights.len() - 1;
            for i in (1..=last).rev() {
                acc.add(self.weights[i]);
                // acc is now P(L > first + i - 1)
                if acc.value() > target {
                    return first + i as u64;
                }
            }
            first
        }
    }
}

/// Binomial(n, 1/2) quantile.
pub(crate) fn binomial_half_quantile(dq: &mut DiscreteQuantile, n: u64, lower: f64, upper: f64) -> u64 {
    dq.quantile(0, n, n / 2, |k| (n - k) as f64 / (k + 1) as f64, lower, upper)
}

/// Number of successes in the first `half` draws without replacement from a
/// population of `2 * half` with `ones` successes.
pub(crate) fn split_quantile(dq: &mut DiscreteQuantile, half: u64, ones: u64, lower: f64, upper: f64) -> u64 {
    let lo = ones.saturating_sub(half);
    let hi = ones.min(half);
    let mode = ((ones + 1) * (half + 1) / (2 * half + 2)).clamp(lo, hi);
    // P(l+1)/P(l) = (half - l)(ones - l) / ((l + 1)(half - ones + l + 1))
    dq.quantile(
        lo,
        hi,
        mode,
        |l| ((half - l) as f64 * (ones - l) as f64) / ((l + 1) as f64 * (half + l + 1 - ones) as f64),
        lower,
        upper,
    )
}

pub fn couple_kmt_dyadic(n_log2: u32, seed: u64) -> Result<CoupledEnvironment> {
    if n_log2 > MAX_DYADIC_LOG2 {
        return Err(Error::ResourceGuard(format!(
            "dyadic coupling limited to N <= 2^{MAX_DYADIC_LOG2}, got 2^{n_log2}"
        )));
    }
    let n = 1usize << n_log2;
    let mut rng = rng::stream(seed);
    let mut dq = DiscreteQuantile::new();

    let mut bm = vec![0.0; n + 1];
    let z: f64 = rng.sample(StandardNormal);
    bm[n] = (n as f64).sqrt() * z;
    let total = binomial_half_quantile(&mut dq, n as u64, stats::normal_cdf(z), stats::normal_sf(z));

    // ones[b] counts successes in block b of the current level
    let mut ones = vec![total];
    let mut block = n;
    while block > 1 {
        let half = block / 2;
        let mut next = Vec::with_capacity(ones.len() * 2);
        for (b, &k) in ones.iter().enumerate() {
            let a = b * block;
            let z: f64 = rng.sample(StandardNormal);
            bm[a + half] = 0.5 * (bm[a] + bm[a + block]) + (half as f64 / 2.0).sqrt() * z;
            let left = split_quantile(&mut dq, half as u64, k, stats::normal_cdf(z), stats::normal_sf(z));
            next.push(left);
            next.push(k - left);
        }
        ones = next;
        block = half;
    }
    let values: Vec<f64> = ones.iter().map(|&o| if o == 1 { 1.0 } else { -1.0 }).collect();
    let draw = EnvironmentDraw::from_values(DisorderLaw::Rademacher, values, seed);
    Ok(CoupledEnvironment::assemble(
        draw,
        bm[1..].to_vec(),
        CouplerKind::DyadicKmt,
    ))
}

/// Builds a coupled environment of size `n` with the given coupler.
pub fn couple(kind: CouplerKind, law: DisorderLaw, n: usize, seed: u64) -> Result<CoupledEnvironment> {
    if !kind.supports(&law) {
        return Err(Error::UnsupportedCoupler {
            coupler: kind.name(),
            law: law.to_string(),
        });
    }
    match kind {
        CouplerKind::ExactGaussian => couple_exact_gaussian(&sample_environment(law, n, seed)?),
        CouplerKind::NaiveQuantile => Ok(couple_naive_quantile(&sample_environment(law, n, seed)?, seed)),
        CouplerKind::DyadicKmt => couple_kmt_dyadic(exact_log2(n)?, seed),
    }
}

/// Empirical tail of `K` recentred at `2 (Gamma_hat + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTailProfile {
    pub coupler: CouplerKind,
    pub n: usize,
    pub replicates: usize,
    pub x_grid: Vec<f64>,
    pub tail_freq: Vec<f64>,
    pub gamma_hat: f64,
    pub lambda_hat: f64,
    pub r2: f64,
    /// All `K` were zero, or too few grid points fell in the fit window.
    pub degenerate: bool,
    pub k_values: Vec<f64>,
}

pub const TAIL_FIT_MIN: f64 = 0.01;
pub const TAIL_FIT_MAX: f64 = 0.5;
const TAIL_GRID_POINTS: usize = 64;

/// `K` over `replicates` independent coupled environments.
pub fn k_samples(kind: CouplerKind, law: DisorderLaw, n: usize, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    if !kind.supports(&law) {
        return Err(Error::UnsupportedCoupler {
            coupler: kind.name(),
            law: law.to_string(),
        });
    }
    let out = crate::par::map_indexed(replicates, |r| {
        let s = rng::derive_seed(seed, rng::tag::COUPLING, n as u64, r as u64);
        couple(kind, law, n, s).map(|c| c.k_stat)
    });
    out.into_iter().collect()
}

pub fn k_tail_profile(
    kind: CouplerKind,
    law: DisorderLaw,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<KTailProfile> {
    if replicates < 200 {
        return Err(Error::param(format!(
            "K tail profile needs at least 200 replicates, got {replicates}"
        )));
    }
    let ks = k_samples(kind, law, n, replicates, seed)?;
    Ok(tail_profile_from_samples(kind, n, ks))
}

pub fn tail_profile_from_samples(kind: CouplerKind, n: usize, ks: Vec<f64>) -> KTailProfile {
    let reps = ks.len();
    let gamma_hat = (stats::median(&ks) / 2.0 - 1.0).max(0.0);
    let center = 2.0 * (gamma_hat + 1.0);
    let kmax = ks.iter().copied().fold(0.0, f64::max);
    let span = (kmax - center).max(0.0);
    let x_grid: Vec<f64> = (0..TAIL_GRID_POINTS)
        .map(|i| span * i as f64 / (TAIL_GRID_POINTS - 1) as f64)
        .collect();
    let tail_freq: Vec<f64> = x_grid
        .iter()
        .map(|x| ks.iter().filter(|&&k| k > center + x).count() as f64 / reps as f64)
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = x_grid
        .iter()
        .zip(&tail_freq)
        .filter(|(_, &p)| (TAIL_FIT_MIN..=TAIL_FIT_MAX).contains(&p))
        .map(|(x, p)| (*x, p.ln()))
        .unzip();
    let all_zero = ks.iter().all(|&k| k == 0.0);
    let fit = if all_zero || xs.len() < 3 {
        None
    } else {
        stats::fit_line(&xs, &ys, None)
    };
    KTailProfile {
        coupler: kind,
        n,
        replicates: reps,
        x_grid,
        tail_freq,
        gamma_hat,
        lambda_hat: fit.map_or(0.0, |f| -f.slope),
        r2: fit.map_or(0.0, |f| f.r2),
        degenerate: fit.is_none(),
        k_values: ks,
    }
}
