use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Integers print as integers; everything else with 17 significant digits.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub name: String,
    pub c_hat: f64,
    pub loglog_slope: Option<f64>,
    pub r2: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// The statistic the verdict was judged on; absent when it could not be
    /// computed (for example a degenerate fit).
    pub value: Option<f64>,
    /// Human-readable acceptance rule, e.g. `slope in [-0.7, -0.3]`.
    pub tolerance: String,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, value: f64, tolerance: impl Into<String>, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            passed,
            value: value.is_finite().then_some(value),
            tolerance: tolerance.into(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub cell: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub suite: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub seeds: Vec<SeedRecord>,
    pub tables: Vec<Table>,
    pub fits: Vec<FitRecord>,
    pub verdicts: Vec<Verdict>,
    /// Seconds per suite; kept out of `report.json` so that payloads are
    /// comparable byte for byte.
    #[serde(skip)]
    pub wall_times: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new(suite: &str, config_hash: &str, master_seed: u64) -> Self {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            suite: suite.to_string(),
            config_hash: config_hash.to_string(),
            master_seed,
            seeds: Vec::new(),
            tables: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
            wall_times: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn seed(&mut self, cell: impl Into<String>, seed: u64) {
        self.seeds.push(SeedRecord {
            cell: cell.into(),
            seed,
        });
    }

    pub fn absorb(&mut self, other: ExperimentReport) {
        self.seeds.extend(other.seeds);
        self.tables.extend(other.tables);
        self.fits.extend(other.fits);
        self.verdicts.extend(other.verdicts);
        self.wall_times.extend(other.wall_times);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One line per verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let _ = writeln!(
                out,
                "{} {}: {} ({}){}",
                if v.passed { "PASS" } else { "FAIL" },
                v.name,
                v.value.map_or("n/a".to_string(), format_number),
                v.tolerance,
                if v.detail.is_empty() {
                    String::new()
                } else {
                    format!(" - {}", v.detail)
                }
            );
        }
        out
    }

    /// Writes `report.json`, `timing.json` and one CSV per table into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let with_path = |p: &Path, e: io::Error| io::Error::new(e.kind(), format!("{}: {e}", p.display()));
        let write = |name: &str, body: &str| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| with_path(&p, e))
        };
        write("report.json", &self.to_json())?;
        write(
            "timing.json",
            &serde_json::to_string_pretty(&self.wall_times).expect("timings serialize"),
        )?;
        for t in &self.tables {
            write(&format!("{}.csv", t.name), &t.to_csv())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(64.0), "64");
        assert_eq!(format_number(-3.0), "-3");
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn csv_and_json_output() {
        let mut t = Table::new("gaps", &["N", "gap"]);
        t.push(vec![64.0, 0.25]);
        assert_eq!(t.to_csv(), "N,gap\n64,2.5000000000000000e-1\n");
        let mut r = ExperimentReport::new("x", "abc", 1);
        r.tables.push(t);
        r.wall_times.insert("x".into(), 1.5);
        r.verdicts.push(Verdict::new("v", true, 1.0, "always", ""));
        assert!(!r.to_json().contains("wall_times"));
        assert!(r.passed());
        let dir = tempfile::tempdir().unwrap();
        r.write_to(dir.path()).unwrap();
        assert!(dir.path().join("gaps.csv").exists());
        let back: ExperimentReport =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back.tables, r.tables);
        assert!(r.summary().starts_with("PASS v"));
    }
}
