//! Coefficients of the particle and limit equations.
//!
//! Every drift and rate family carries closed-form derivatives up to order
//! four, for `f` and for `sqrt(f)`, plus the global Lipschitz constants the
//! thinning majorant relies on.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::environment::DisorderLaw;
use crate::error::{Error, Result};

/// `tanh` and its first four derivatives at `u`.
#[inline]
pub(crate) fn tanh_derivs(u: f64) -> [f64; 5] {
    let t = u.tanh();
    let s = 1.0 - t * t;
    [
        t,
        s,
        -2.0 * t * s,
        s * (6.0 * t * t - 2.0),
        8.0 * t * s * (2.0 - 3.0 * t * t),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Drift {
    /// `b(x) = -alpha x + c`
    Linear { alpha: f64, c: f64 },
    /// `b(x) = -scale tanh(gain x)`
    Tanh { scale: f64, gain: f64 },
}

impl Drift {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Drift::Linear { alpha, c } => -alpha * x + c,
            Drift::Tanh { scale, gain } => -scale * (gain * x).tanh(),
        }
    }

    /// `[b, b', b'', b''', b'''']` at `x`.
    pub fn derivatives(&self, x: f64) -> [f64; 5] {
        match *self {
            Drift::Linear { alpha, c } => [-alpha * x + c, -alpha, 0.0, 0.0, 0.0],
            Drift::Tanh { scale, gain } => {
                let d = tanh_derivs(gain * x);
                let mut out = [0.0; 5];
                let mut g = 1.0;
                for k in 0..5 {
                    out[k] = -scale * g * d[k];
                    g *= gain;
                }
                out
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Drift::Linear { alpha, .. } => alpha.abs(),
            Drift::Tanh { scale, gain } => (scale * gain).abs(),
        }
    }

    /// Exact flow of `dx/dt = b(x)` over `dt >= 0`.
    pub fn flow(&self, x: f64, dt: f64) -> f64 {
        if dt == 0.0 {
            return x;
        }
        match *self {
            Drift::Linear { alpha, c } => {
                if alpha == 0.0 {
                    x + c * dt
                } else {
                    // x e^{-a dt} + (c/a)(1 - e^{-a dt}), with expm1 for small a dt
                    let em = (-alpha * dt).exp_m1();
                    x + (x - c / alpha) * em
                }
            }
            Drift::Tanh { scale, gain } => tanh_flow(scale, gain, x, dt),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Drift::Linear { alpha, c } => alpha.is_finite() && c.is_finite(),
            Drift::Tanh { scale, gain } => scale.is_finite() && gain.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("drift `{self}` has non-finite parameters")))
        }
    }
}

/// Flow of `x' = -a tanh(g x)`: `sinh(g x_t) = sinh(g x_0) exp(-a g t)`.
fn tanh_flow(scale: f64, gain: f64, x: f64, dt: f64) -> f64 {
    if gain == 0.0 || scale == 0.0 || x == 0.0 {
        return x;
    }
    let y = gain * x;
    let decay = -scale * gain * dt;
    let sign = y.signum();
    let ay = y.abs();
    let out = if ay < 20.0 {
        let v = ay.sinh() * decay.exp();
        v.asinh()
    } else {
        // ln sinh(ay) = ay - ln 2 + ln(1 - e^{-2 ay})
        let ln_v = ay - std::f64::consts::LN_2 + (-(-2.0 * ay).exp()).ln_1p() + decay;
        if ln_v > 20.0 {
            // asinh(v) = ln(2v) + O(v^-2)
            ln_v + std::f64::consts::LN_2
        } else {
            ln_v.exp().asinh()
        }
    };
    sign * out / gain
}

impl fmt::Display for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Drift::Linear { alpha, c } => write!(f, "linear:{alpha:?},{c:?}"),
            Drift::Tanh { scale, gain } => write!(f, "tanh:{scale:?},{gain:?}"),
        }
    }
}

fn parse_args(s: &str, what: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let args = if rest.trim().is_empty() {
        Vec::new()
    } else {
        rest.split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::param(format!("{what} `{s}`: cannot parse `{}`", a.trim())))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok((name.trim().to_ascii_lowercase(), args))
}

fn expect_arity(s: &str, what: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::param(format!(
            "{what} `{s}` expects {n} parameter(s), got {}",
            args.len()
        )));
    }
    Ok(())
}

impl FromStr for Drift {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_args(s, "drift")?;
        let d = match name.as_str() {
            "linear" => {
                expect_arity(s, "drift", &a, 2)?;
                Drift::Linear { alpha: a[0], c: a[1] }
            }
            "tanh" => {
                expect_arity(s, "drift", &a, 2)?;
                Drift::Tanh {
                    scale: a[0],
                    gain: a[1],
                }
            }
            other => return Err(Error::param(format!("unknown drift `{other}`"))),
        };
        d.validate()?;
        Ok(d)
    }
}

impl From<Drift> for String {
    fn from(d: Drift) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Drift {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Rate {
    /// `f(x) = lambda`
    Constant { lambda: f64 },
    /// `f(x) = f0 + f1 (1 + tanh(kappa x)) / 2`
    Tanh { f0: f64, f1: f64, kappa: f64 },
}

impl Rate {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Rate::Constant { lambda } => lambda,
            Rate::Tanh { f0, f1, kappa } => f0 + 0.5 * f1 * (1.0 + (kappa * x).tanh()),
        }
    }

    /// `[f, f', f'', f''', f'''']` at `x`.
    pub fn derivatives(&self, x: f64) -> [f64; 5] {
        match *self {
            Rate::Constant { lambda } => [lambda, 0.0, 0.0, 0.0, 0.0],
            Rate::Tanh { f0, f1, kappa } => {
                let d = tanh_derivs(kappa * x);
                let mut out = [0.0; 5];
                out[0] = f0 + 0.5 * f1 * (1.0 + d[0]);
                let mut g = kappa;
                for k in 1..5 {
                    out[k] = 0.5 * f1 * g * d[k];
                    g *= kappa;
                }
                out
            }
        }
    }

    /// Derivatives of `sqrt(f)` up to order four (Faa di Bruno).
    pub fn sqrt_derivatives(&self, x: f64) -> [f64; 5] {
        let [f, f1, f2, f3, f4] = self.derivatives(x);
        if f <= 0.0 {
            // only Constant(0) reaches here; sqrt(f) is identically zero
            return [0.0; 5];
        }
        let h = f.sqrt();
        let p1 = 0.5 / h;
        let p2 = -0.25 / (h * f);
        let p3 = 0.375 / (h * f * f);
        let p4 = -0.9375 / (h * f * f * f);
        [
            h,
            p1 * f1,
            p2 * f1 * f1 + p1 * f2,
            p3 * f1.powi(3) + 3.0 * p2 * f1 * f2 + p1 * f3,
            p4 * f1.powi(4) + 6.0 * p3 * f1 * f1 * f2 + p2 * (3.0 * f2 * f2 + 4.0 * f1 * f3) + p1 * f4,
        ]
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Rate::Constant { .. } => 0.0,
            Rate::Tanh { f1, kappa, .. } => 0.5 * (f1 * kappa).abs(),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Rate::Constant { lambda } => lambda,
            Rate::Tanh { f0, f1, .. } => f0 + f1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Rate::Constant { lambda } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(Error::param(format!(
                        "rate `{self}`: intensity must be finite and non-negative"
                    )));
                }
            }
            Rate::Tanh { f0, f1, kappa } => {
                if !(f0.is_finite() && f1.is_finite() && kappa.is_finite()) {
                    return Err(Error::param(format!("rate `{self}` has non-finite parameters")));
                }
                if f0 <= 0.0 {
                    return Err(Error::param(format!(
                        "rate `{self}`: f0 must be > 0 so that sqrt(f) stays C^4 with bounded derivatives"
                    )));
                }
                if f1 < 0.0 {
                    return Err(Error::param(format!("rate `{self}`: f1 must be >= 0")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Rate::Constant { lambda } => write!(f, "const:{lambda:?}"),
            Rate::Tanh { f0, f1, kappa } => write!(f, "tanh:{f0:?},{f1:?},{kappa:?}"),
        }
    }
}

impl FromStr for Rate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_args(s, "rate")?;
        let r = match name.as_str() {
            "const" | "constant" => {
                expect_arity(s, "rate", &a, 1)?;
                Rate::Constant { lambda: a[0] }
            }
            "tanh" => {
                expect_arity(s, "rate", &a, 3)?;
                Rate::Tanh {
                    f0: a[0],
                    f1: a[1],
                    kappa: a[2],
                }
            }
            other => return Err(Error::param(format!("unknown rate `{other}`"))),
        };
        r.validate()?;
        Ok(r)
    }
}

impl From<Rate> for String {
    fn from(r: Rate) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for Rate {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Law of the initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum InitialLaw {
    Dirac {
        x0: f64,
    },
    Gaussian {
        m: f64,
        s: f64,
    },
    /// `delta_{x0 + eps N^{-exponent}}` for the N-particle system; its
    /// limit counterpart is `Dirac(x0)`.
    PerturbedDirac {
        x0: f64,
        eps: f64,
        exponent: f64,
    },
}

impl InitialLaw {
    /// Location and scale of the (possibly degenerate) normal law this
    /// initial condition is, at system size `n`.
    pub fn location_scale(&self, n: usize) -> (f64, f64) {
        match *self {
            InitialLaw::Dirac { x0 } => (x0, 0.0),
            InitialLaw::Gaussian { m, s } => (m, s),
            InitialLaw::PerturbedDirac { x0, eps, exponent } => (x0 + eps * (n as f64).powf(-exponent), 0.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> f64 {
        let (m, s) = self.location_scale(n);
        if s == 0.0 {
            m
        } else {
            m + s * rng.sample::<f64, _>(StandardNormal)
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, InitialLaw::Gaussian { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialLaw::Dirac { x0 } => x0.is_finite(),
            InitialLaw::Gaussian { m, s } => m.is_finite() && s.is_finite() && s >= 0.0,
            InitialLaw::PerturbedDirac { x0, eps, exponent } => {
                x0.is_finite() && eps.is_finite() && exponent.is_finite() && exponent >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("initial law `{self}` has invalid parameters")))
        }
    }
}

/// Kantorovich–Rubinstein distance between two initial laws at size `n`.
///
/// All shipped laws are normal (possibly degenerate), and the monotone
/// coupling is optimal on the line, so the distance is `E|dm + ds Z|`.
pub fn kr_distance(a: &InitialLaw, b: &InitialLaw, n: usize) -> f64 {
    let (m1, s1) = a.location_scale(n);
    let (m2, s2) = b.location_scale(n);
    folded_normal_mean(m1 - m2, (s1 - s2).abs())
}

/// `E|mu + sigma Z|`.
pub fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mu.abs();
    }
    let r = mu / sigma;
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * r * r).exp() + mu * (1.0 - 2.0 * crate::stats::normal_cdf(-r))
}

impl fmt::Display for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitialLaw::Dirac { x0 } => write!(f, "dirac:{x0:?}"),
            InitialLaw::Gaussian { m, s } => write!(f, "gaussian:{m:?},{s:?}"),
            InitialLaw::PerturbedDirac { x0, eps, exponent } => {
                write!(f, "perturbed:{x0:?},{eps:?},{exponent:?}")
            }
        }
    }
}

impl FromStr for InitialLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_args(s, "initial law")?;
        let l = match name.as_str() {
            "dirac" => {
                expect_arity(s, "initial law", &a, 1)?;
                InitialLaw::Dirac { x0: a[0] }
            }
            "gaussian" => {
                expect_arity(s, "initial law", &a, 2)?;
                InitialLaw::Gaussian { m: a[0], s: a[1] }
            }
            "perturbed" => {
                expect_arity(s, "initial law", &a, 3)?;
                InitialLaw::PerturbedDirac {
                    x0: a[0],
                    eps: a[1],
                    exponent: a[2],
                }
            }
            "cauchy" | "pareto" | "student" => {
                return Err(Error::param(format!("initial law `{name}` lacks finite sixth moments")))
            }
            other => return Err(Error::param(format!("unknown initial law `{other}`"))),
        };
        l.validate()?;
        Ok(l)
    }
}

impl From<InitialLaw> for String {
    fn from(l: InitialLaw) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for InitialLaw {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub drift: Drift,
    pub rate: Rate,
    pub law: DisorderLaw,
    pub init_particle: InitialLaw,
    pub init_limit: InitialLaw,
    pub horizon: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::tanh_model(DisorderLaw::Rademacher)
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.drift.validate()?;
        self.rate.validate()?;
        self.law.validate()?;
        self.init_particle.validate()?;
        self.init_limit.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::param(format!(
                "horizon T must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `b = 0`, `f = lambda`, deterministic start.
    pub fn constant_rate(lambda: f64, law: DisorderLaw, x0: f64, horizon: f64) -> Self {
        ModelSpec {
            drift: Drift::Linear { alpha: 0.0, c: 0.0 },
            rate: Rate::Constant { lambda },
            law,
            init_particle: InitialLaw::Dirac { x0 },
            init_limit: InitialLaw::Dirac { x0 },
            horizon,
        }
    }

    /// Restoring tanh drift with a tanh rate bounded below.
    pub fn tanh_model(law: DisorderLaw) -> Self {
        ModelSpec {
            drift: Drift::Tanh { scale: 1.0, gain: 1.0 },
            rate: Rate::Tanh {
                f0: 0.5,
                f1: 1.0,
                kappa: 1.0,
            },
            law,
            init_particle: InitialLaw::Dirac { x0: 0.0 },
            init_limit: InitialLaw::Dirac { x0: 0.0 },
            horizon: 1.0,
        }
    }

    pub fn is_constant_rate_pure_jump(&self) -> Option<f64> {
        match (self.drift, self.rate) {
            (Drift::Linear { alpha, c }, Rate::Constant { lambda }) if alpha == 0.0 && c == 0.0 => Some(lambda),
            _ => None,
        }
    }

    /// d_KR between the initial laws at size `n`.
    pub fn kr_init(&self, n: usize) -> f64 {
        kr_distance(&self.init_particle, &self.init_limit, n)
    }
}
