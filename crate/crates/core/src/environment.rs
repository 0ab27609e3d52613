//! Disorder laws and frozen environment draws.
//!
//! The variables `U_1, U_2, ...` form one countable sequence per seed: the
//! draw for `N` particles is the first `N` entries of the draw for `N + 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, open01};
use crate::stats::{self, CompensatedSum};

/// Centered disorder distribution with exponential moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DisorderLaw {
    Rademacher,
    /// Uniform on `[-half_width, half_width]`.
    UniformSymmetric {
        half_width: f64,
    },
    /// Laplace with density `exp(-|x|/scale) / (2 scale)`.
    LaplaceCentered {
        scale: f64,
    },
    GaussianCentered {
        std: f64,
    },
}

impl DisorderLaw {
    pub fn validate(&self) -> Result<()> {
        let (name, p) = match *self {
            DisorderLaw::Rademacher => return Ok(()),
            DisorderLaw::UniformSymmetric { half_width } => ("uniform half-width", half_width),
            DisorderLaw::LaplaceCentered { scale } => ("laplace scale", scale),
            DisorderLaw::GaussianCentered { std } => ("gaussian std", std),
        };
        if p.is_finite() && p > 0.0 {
            Ok(())
        } else {
            Err(Error::param(format!("{name} must be positive and finite, got {p}")))
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DisorderLaw::Rademacher => 1.0,
            DisorderLaw::UniformSymmetric { half_width: a } => a * a / 3.0,
            DisorderLaw::LaplaceCentered { scale: s } => 2.0 * s * s,
            DisorderLaw::GaussianCentered { std } => std * std,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.variance().sqrt()
    }

    /// One admissible `alpha` with `E exp(alpha |U|) < infinity`.
    pub fn exp_moment_alpha(&self) -> f64 {
        match *self {
            DisorderLaw::Rademacher => 1.0,
            DisorderLaw::UniformSymmetric { half_width } => 1.0 / half_width,
            // the Laplace mgf is finite only below 1/scale
            DisorderLaw::LaplaceCentered { scale } => 0.5 / scale,
            DisorderLaw::GaussianCentered { std } => 1.0 / std,
        }
    }

    /// Maps two independent 64-bit words to one draw.
    #[inline]
    pub(crate) fn draw_from_bits(&self, a: u64, b: u64) -> f64 {
        match *self {
            DisorderLaw::Rademacher => {
                if a >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            DisorderLaw::UniformSymmetric { half_width } => half_width * (2.0 * open01(a) - 1.0),
            DisorderLaw::LaplaceCentered { scale } => {
                let u = open01(a);
                if u < 0.5 {
                    scale * (2.0 * u).ln()
                } else {
                    -scale * (2.0 * (1.0 - u)).ln()
                }
            }
            DisorderLaw::GaussianCentered { std } => {
                let r = (-2.0 * open01(a).ln()).sqrt();
                std * r * (std::f64::consts::TAU * open01(b)).cos()
            }
        }
    }

    /// Distributional transform `F(x-) + v (F(x) - F(x-))`, returned as the
    /// pair `(p, 1 - p)` with both tails computed directly.
    pub fn distributional_transform(&self, x: f64, v: f64) -> (f64, f64) {
        match *self {
            DisorderLaw::Rademacher => {
                if x > 0.0 {
                    let p = 0.5 + 0.5 * v;
                    (p, 0.5 * (1.0 - v))
                } else {
                    (0.5 * v, 1.0 - 0.5 * v)
                }
            }
            DisorderLaw::UniformSymmetric { half_width: a } => {
                let p = ((x + a) / (2.0 * a)).clamp(0.0, 1.0);
                let q = ((a - x) / (2.0 * a)).clamp(0.0, 1.0);
                (p, q)
            }
            DisorderLaw::LaplaceCentered { scale } => {
                if x < 0.0 {
                    let p = 0.5 * (x / scale).exp();
                    (p, 1.0 - p)
                } else {
                    let q = 0.5 * (-x / scale).exp();
                    (1.0 - q, q)
                }
            }
            DisorderLaw::GaussianCentered { std } => (stats::normal_cdf(x / std), stats::normal_sf(x / std)),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, DisorderLaw::GaussianCentered { .. })
    }
}

impl fmt::Display for DisorderLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DisorderLaw::Rademacher => write!(f, "rademacher"),
            DisorderLaw::UniformSymmetric { half_width } => write!(f, "uniform:{half_width:?}"),
            DisorderLaw::LaplaceCentered { scale } => write!(f, "laplace:{scale:?}"),
            DisorderLaw::GaussianCentered { std } => write!(f, "gaussian:{std:?}"),
        }
    }
}

const HEAVY_TAILED: &[&str] = &["cauchy", "student", "t", "pareto", "levy", "stable", "lognormal"];

impl FromStr for DisorderLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| Error::param(format!("law `{name}` needs a {what}")))?;
            a.parse::<f64>()
                .map_err(|_| Error::param(format!("law `{name}`: cannot parse {what} `{a}`")))
        };
        let law = match name.to_ascii_lowercase().as_str() {
            "rademacher" => {
                if arg.is_some() {
                    return Err(Error::param("law `rademacher` takes no parameter"));
                }
                DisorderLaw::Rademacher
            }
            "uniform" => DisorderLaw::UniformSymmetric {
                half_width: num("half-width")?,
            },
            "laplace" => DisorderLaw::LaplaceCentered {
                scale: num("scale")?,
            },
            "gaussian" => DisorderLaw::GaussianCentered { std: num("std")? },
            other if HEAVY_TAILED.contains(&other) => {
                return Err(Error::param(format!(
                    "law `{other}` has no exponential moment; disorder laws must be centered with E exp(a|U|) finite for some a > 0"
                )))
            }
            other => return Err(Error::param(format!("unknown disorder law `{other}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

impl From<DisorderLaw> for String {
    fn from(l: DisorderLaw) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for DisorderLaw {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A frozen environment `(U_1, ..., U_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentDraw {
    pub law: DisorderLaw,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl EnvironmentDraw {
    /// Wraps explicit values (test vectors, reconstructed walks).
    pub fn from_values(law: DisorderLaw, values: Vec<f64>, seed: u64) -> Self {
        Self { law, values, seed }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// First `n` variables.
    pub fn prefix(&self, n: usize) -> EnvironmentDraw {
        EnvironmentDraw {
            law: self.law,
            values: self.values[..n.min(self.values.len())].to_vec(),
            seed: self.seed,
        }
    }

    /// `N^{-1/2} sum U_j`.
    pub fn s_n(&self) -> f64 {
        compensated(&self.values) / (self.n() as f64).sqrt()
    }
}

fn compensated(xs: &[f64]) -> f64 {
    stats::compensated_sum(xs.iter().copied())
}

pub fn sample_environment(law: DisorderLaw, n: usize, seed: u64) -> Result<EnvironmentDraw> {
    law.validate()?;
    if n == 0 {
        return Err(Error::param("environment size N must be at least 1"));
    }
    let mut rng = rng::env_stream(seed);
    let values = (0..n)
        .map(|_| {
            let (a, b) = rng::uniform_pair(&mut rng);
            law.draw_from_bits(a, b)
        })
        .collect();
    Ok(EnvironmentDraw { law, values, seed })
}

/// Random access to `U_{index + 1}` of the sequence for `seed`.
pub fn environment_value(law: DisorderLaw, seed: u64, index: u64) -> f64 {
    let mut rng = rng::env_stream(seed);
    rng::seek_value(&mut rng, index);
    let (a, b) = rng::uniform_pair(&mut rng);
    law.draw_from_bits(a, b)
}

/// `S_n = n^{-1/2} sum_{j <= n} U_j` for `n = 1..N`.
pub fn scaled_partial_sums(draw: &EnvironmentDraw) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    draw.values
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            acc.add(u);
            acc.value() / ((i + 1) as f64).sqrt()
        })
        .collect()
}

/// Environment ingredients of the generator-gap bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvStats {
    pub s_n: f64,
    /// `(N sqrt N)^{-1} sum |U_j|^3`
    pub abs3_term: f64,
    /// `|N^{-1} sum U_j^2 - sigma^2|`
    pub var_gap: f64,
    pub abs4_mean: f64,
    /// `2 sqrt(ln ln N)`, only for `N >= 3`.
    pub lil_envelope: Option<f64>,
}

pub fn environment_statistics(draw: &EnvironmentDraw) -> EnvStats {
    let n = draw.n() as f64;
    let sum3 = stats::compensated_sum(draw.values.iter().map(|u| u.abs().powi(3)));
    let sum2 = stats::compensated_sum(draw.values.iter().map(|u| u * u));
    let sum4 = stats::compensated_sum(draw.values.iter().map(|u| u.powi(4)));
    EnvStats {
        s_n: draw.s_n(),
        abs3_term: sum3 / (n * n.sqrt()),
        var_gap: (sum2 / n - draw.law.variance()).abs(),
        abs4_mean: sum4 / n,
        lil_envelope: lil_envelope(draw.n()),
    }
}

pub fn lil_envelope(n: usize) -> Option<f64> {
    (n >= 3).then(|| 2.0 * (n as f64).ln().ln().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentEstimate {
    pub mean: f64,
    /// Normal-approximation 95% half-width.
    pub ci: f64,
    /// Some replicate overflowed and was capped at `exp(SATURATION_EXPONENT)`.
    pub saturated: bool,
}

pub const SATURATION_EXPONENT: f64 = 700.0;

/// Monte Carlo estimate of `E exp(gamma |S_N|)`.
pub fn exp_moment_estimate(
    law: DisorderLaw,
    gamma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<ExpMomentEstimate> {
    if replicates < 100 {
        return Err(Error::param(format!(
            "exp-moment estimate needs at least 100 replicates, got {replicates}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    law.validate()?;
    let terms = crate::par::map_indexed(replicates, |r| {
        let s = rng::derive_seed(seed, rng::tag::ENVIRONMENT, n as u64, r as u64);
        let draw = sample_environment(law, n, s).expect("validated above");
        let e = gamma * draw.s_n().abs();
        if e > SATURATION_EXPONENT {
            (SATURATION_EXPONENT.exp(), true)
        } else {
            (e.exp(), false)
        }
    });
    let values: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let (mean, se) = stats::mean_se(&values);
    Ok(ExpMomentEstimate {
        mean,
        ci: 1.96 * se,
        saturated: terms.iter().any(|t| t.1),
    })
}
