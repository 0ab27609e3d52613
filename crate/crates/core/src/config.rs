//! Experiment configuration: a sectioned TOML document.
//!
//! ```toml
//! master_seed = 20240611
//!
//! [model]
//! drift = "tanh:1,1"
//! rate = "tanh:0.5,1,1"
//! law = "rademacher"
//!
//! [experiment]
//! n_grid = [64, 256, 1024, 4096]
//! times = [1.0]
//! test_functions = ["tanh:1,1"]
//! ```
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! and duplicate keys are errors.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::CouplerKind;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::operators::TestFunction;

pub const DEFAULT_MASTER_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_grid: Vec<usize>,
    pub times: Vec<f64>,
    /// One test function per time: the fidi functional is `prod g_i(X_{t_i})`.
    pub test_functions: Vec<TestFunction>,
    pub n_paths: usize,
    pub coupler: CouplerKind,
    pub dt: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            n_grid: vec![64, 256, 1024, 4096],
            times: vec![1.0],
            test_functions: vec![TestFunction::TanhWave { a: 1.0, k: 1.0 }],
            n_paths: 20_000,
            coupler: CouplerKind::DyadicKmt,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchedSection {
    pub n_grid: Vec<usize>,
    pub n_paths: usize,
    /// Exponents `c` of the `(ln N)^c` envelope scanned for boundedness.
    pub c_grid: Vec<f64>,
}

impl Default for QuenchedSection {
    fn default() -> Self {
        QuenchedSection {
            n_grid: vec![256, 1024, 4096, 16384],
            n_paths: 10_000,
            c_grid: vec![0.0, 1.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub n_log2_min: u32,
    pub n_log2_max: u32,
    pub replicates: usize,
    pub couplers: Vec<CouplerKind>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            n_log2_min: 8,
            n_log2_max: 16,
            replicates: 500,
            couplers: CouplerKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentSection {
    pub n_grid: Vec<usize>,
    pub n_paths: usize,
    pub p: u32,
    pub kappa: f64,
    /// Number of equally spaced observation times on `[0, T]`.
    pub grid_points: usize,
}

impl Default for MomentSection {
    fn default() -> Self {
        MomentSection {
            n_grid: vec![64, 256, 1024, 4096],
            n_paths: 20_000,
            p: 2,
            kappa: 2.0,
            grid_points: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessSection {
    pub n: usize,
    /// Left end `r` of every window.
    pub r: f64,
    /// Windows `t - r = 2^{-j}`; the midpoint is `s`.
    pub span_log2: Vec<u32>,
    pub n_paths: usize,
}

impl Default for TightnessSection {
    fn default() -> Self {
        TightnessSection {
            n: 1024,
            r: 0.25,
            span_log2: vec![2, 3, 4, 5, 6],
            n_paths: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub annealed: bool,
    pub quenched: bool,
    pub coupling: bool,
    pub moments: bool,
}

impl Default for SuiteSection {
    fn default() -> Self {
        SuiteSection {
            annealed: true,
            quenched: true,
            coupling: true,
            moments: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub slope_min: f64,
    pub slope_max: f64,
    /// Width, in combined standard errors, of the monotonicity allowance.
    pub ci_z: f64,
    pub tightness_exponent_min: f64,
    pub moment_ratio_max: f64,
    pub k_median_ratio_max: f64,
    pub tail_r2_min: f64,
    pub naive_growth_min: f64,
    pub abort_fraction_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            slope_min: -0.7,
            slope_max: -0.3,
            ci_z: 1.96,
            tightness_exponent_min: 1.3,
            moment_ratio_max: 2.0,
            k_median_ratio_max: 3.0,
            tail_r2_min: 0.9,
            naive_growth_min: 2.0,
            abort_fraction_max: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Worker hint; zero means all cores. Never affects results.
    pub threads: usize,
    pub model: ModelSpec,
    pub experiment: ExperimentSection,
    pub quenched: QuenchedSection,
    pub coupling: CouplingSection,
    pub moments: MomentSection,
    pub tightness: TightnessSection,
    pub suites: SuiteSection,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: DEFAULT_MASTER_SEED,
            threads: 0,
            model: ModelSpec::default(),
            experiment: ExperimentSection::default(),
            quenched: QuenchedSection::default(),
            coupling: CouplingSection::default(),
            moments: MomentSection::default(),
            tightness: TightnessSection::default(),
            suites: SuiteSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Line (1-based) of `key` inside `[section]`, or at top level when
/// `section` is empty.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn strictly_increasing(xs: &[usize]) -> bool {
    !xs.is_empty() && xs.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    /// Checks cross-field constraints. Errors carry the line of the
    /// offending key in `text` when one is given.
    pub fn validate_against(&self, text: Option<&str>) -> Result<()> {
        let at =
            |section: &str, key: &str, msg: String| Error::config(text.and_then(|t| line_of_key(t, section, key)), msg);
        if self.master_seed > i64::MAX as u64 {
            return Err(at("", "master_seed", "master_seed must be below 2^63".into()));
        }
        let m = &self.model;
        let field = |key: &str, r: Result<()>| r.map_err(|e| at("model", key, e.to_string()));
        field("drift", m.drift.validate())?;
        field("rate", m.rate.validate())?;
        field("law", m.law.validate())?;
        field("init_particle", m.init_particle.validate())?;
        field("init_limit", m.init_limit.validate())?;
        if !(m.horizon.is_finite() && m.horizon > 0.0) {
            return Err(at(
                "model",
                "horizon",
                format!("horizon must be positive, got {}", m.horizon),
            ));
        }

        let e = &self.experiment;
        if !strictly_increasing(&e.n_grid) || e.n_grid[0] == 0 {
            return Err(at(
                "experiment",
                "n_grid",
                "n_grid must be nonempty, positive and strictly increasing".into(),
            ));
        }
        if e.times.is_empty()
            || e.times.windows(2).any(|w| w[0] > w[1])
            || e.times.iter().any(|t| !(*t >= 0.0 && *t <= m.horizon))
        {
            return Err(at(
                "experiment",
                "times",
                format!("times must be nonempty, sorted and inside [0, {}]", m.horizon),
            ));
        }
        if e.test_functions.len() != e.times.len() {
            return Err(at(
                "experiment",
                "test_functions",
                format!(
                    "need one test function per time ({} times, {} functions)",
                    e.times.len(),
                    e.test_functions.len()
                ),
            ));
        }
        if e.n_paths < 2 {
            return Err(at("experiment", "n_paths", "n_paths must be at least 2".into()));
        }
        if !(e.dt > 0.0 && e.dt <= m.horizon) {
            return Err(at("experiment", "dt", format!("dt must lie in (0, T], got {}", e.dt)));
        }
        let grid = crate::limit::TimeGrid::covering(m.horizon, e.dt)?;
        for t in &e.times {
            grid.index_of(*t).map_err(|_| {
                at(
                    "experiment",
                    "times",
                    format!("time {t} is not a multiple of the step {}", grid.dt),
                )
            })?;
        }

        if self.suites.quenched {
            let q = &self.quenched;
            if !strictly_increasing(&q.n_grid) || q.n_grid[0] == 0 {
                return Err(at(
                    "quenched",
                    "n_grid",
                    "n_grid must be nonempty and strictly increasing".into(),
                ));
            }
            if q.n_paths < 2 {
                return Err(at("quenched", "n_paths", "n_paths must be at least 2".into()));
            }
            if !e.coupler.supports(&m.law) {
                return Err(at(
                    "experiment",
                    "coupler",
                    format!("coupler `{}` does not support disorder law `{}`", e.coupler, m.law),
                ));
            }
            if e.coupler == CouplerKind::DyadicKmt {
                let top = *q.n_grid.last().unwrap();
                crate::coupling::exact_log2(top).map_err(|err| at("quenched", "n_grid", err.to_string()))?;
            }
        }
        if self.suites.coupling {
            let c = &self.coupling;
            if c.n_log2_min < 1 || c.n_log2_min > c.n_log2_max || c.n_log2_max > crate::coupling::MAX_DYADIC_LOG2 {
                return Err(at(
                    "coupling",
                    "n_log2_max",
                    format!(
                        "need 1 <= n_log2_min <= n_log2_max <= {}",
                        crate::coupling::MAX_DYADIC_LOG2
                    ),
                ));
            }
            if c.replicates < 200 {
                return Err(at("coupling", "replicates", "replicates must be at least 200".into()));
            }
        }
        if self.suites.moments {
            let mo = &self.moments;
            if !strictly_increasing(&mo.n_grid) || mo.n_grid[0] == 0 {
                return Err(at(
                    "moments",
                    "n_grid",
                    "n_grid must be nonempty and strictly increasing".into(),
                ));
            }
            if mo.p < 2 || !(mo.kappa >= 2.0 && mo.kappa < 2.0 * mo.p as f64) {
                return Err(at("moments", "kappa", "need p >= 2 and 2 <= kappa < 2p".into()));
            }
            if mo.grid_points < 2 || mo.n_paths < 2 {
                return Err(at(
                    "moments",
                    "grid_points",
                    "need at least 2 grid points and 2 paths".into(),
                ));
            }
            let t = &self.tightness;
            if t.span_log2.len() < 2 || t.n == 0 || t.n_paths < 2 {
                return Err(at(
                    "tightness",
                    "span_log2",
                    "need at least two windows, n >= 1 and 2 paths".into(),
                ));
            }
            let widest = t.span_log2.iter().map(|j| 0.5f64.powi(*j as i32)).fold(0.0, f64::max);
            if !(t.r >= 0.0 && t.r + widest <= m.horizon) {
                return Err(at(
                    "tightness",
                    "r",
                    format!("windows [r, r + 2^-j] must fit in [0, {}]", m.horizon),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_against(None)
    }

    /// Canonical TOML text; parsing it returns an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(None, e.to_string()))
    }

    /// SHA-256 of the canonical text with the worker hint cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        let text = c.to_toml().expect("validated configs serialize");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        Error::config(line, e.message().trim().to_string())
    })?;
    cfg.validate_against(Some(text))?;
    Ok(cfg)
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn override_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Applies `section.key=value` overrides to a config text and parses the
/// result.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    if overrides.is_empty() {
        return parse_config(text);
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        Error::config(line, e.message().trim().to_string())
    })?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| Error::config(None, format!("override `{o}` is not key=value")))?;
        let path: Vec<&str> = key.trim().split('.').collect();
        let mut node = &mut table;
        for part in &path[..path.len() - 1] {
            node = node
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::config(None, format!("override `{o}`: `{part}` is not a section")))?;
        }
        node.insert(path[path.len() - 1].to_string(), override_value(value.trim()));
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(None, format!("after overrides: {}", e.message().trim())))?;
    cfg.validate().map_err(|e| match e {
        Error::Config { message, .. } => Error::config(None, format!("after overrides: {message}")),
        other => other,
    })?;
    Ok(cfg)
}
