use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("coupler `{coupler}` does not support disorder law `{law}`")]
    UnsupportedCoupler { coupler: &'static str, law: String },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("path aborted at t = {time}: state {state} is not finite or exceeds the blowup guard")]
    AbortedPath { time: f64, state: f64 },

    #[error("invalid thinning: intensity {intensity} exceeds majorant {majorant} at t = {time}")]
    InvalidThinning { time: f64, intensity: f64, majorant: f64 },

    #[error("time {t} outside the path range [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("sample size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("generator inequality violated: lhs {lhs} > rhs {rhs}")]
    BoundViolation { lhs: f64, rhs: f64 },

    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: msg.into(),
        }
    }
}
