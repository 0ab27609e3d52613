use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
master_seed = 7

[experiment]
n_grid = [16, 64, 256]
n_paths = 300
dt = 0.01

[quenched]
n_grid = [16, 64, 256]
n_paths = 200

[coupling]
n_log2_min = 4
n_log2_max = 6
replicates = 200

[moments]
n_grid = [16, 64]
n_paths = 200

[tightness]
n = 64
n_paths = 200
"#;

fn disorder(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disorder"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("DISORDER_OUT")
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_pdmp_writes_a_jump_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = disorder(dir.path(), &["simulate-pdmp", "--n", "64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "pdmp_path.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,state,particle_index"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert!(rows.len() > 10);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows.last().unwrap()[2], "0");
    let times: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    for r in &rows[1..rows.len() - 1] {
        let j: usize = r[2].parse().unwrap();
        assert!((1..=64).contains(&j));
    }
    let prov: serde_json::Value = serde_json::from_str(&read(dir.path(), "provenance.json")).unwrap();
    assert_eq!(prov["subcommand"], "simulate-pdmp");

    // same seed, same file
    let again = tempfile::tempdir().unwrap();
    disorder(again.path(), &["simulate-pdmp", "--n", "64"]);
    assert_eq!(read(again.path(), "pdmp_path.csv"), csv);
    let other = tempfile::tempdir().unwrap();
    disorder(other.path(), &["simulate-pdmp", "--n", "64", "--seed", "3"]);
    assert_ne!(read(other.path(), "pdmp_path.csv"), csv);
}

#[test]
fn simulate_limit_respects_w_and_dt() {
    let dir = tempfile::tempdir().unwrap();
    let o = disorder(dir.path(), &["simulate-limit", "--w", "-0.5", "--dt", "0.01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("w = -0.5"));
    let csv = read(dir.path(), "limit_path.csv");
    assert_eq!(csv.lines().count(), 1 + 101);
    assert!(csv.lines().last().unwrap().starts_with("1,"));
}

#[test]
fn couple_writes_tail_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = disorder(dir.path(), &["couple", "--n", "256", "--replicates", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&read(dir.path(), "k_fit.json")).unwrap();
    assert_eq!(fit["coupler"], "dyadic-kmt");
    assert_eq!(fit["n"], 256);
    assert!(fit["lambda_hat"].as_f64().unwrap() > 0.0);
    assert!(read(dir.path(), "k_tail.csv").starts_with("x,tail_freq\n"));

    let bad = disorder(dir.path(), &["couple", "--n", "100"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = disorder(
        dir.path(),
        &[
            "couple",
            "--coupler",
            "exact-gaussian",
            "--law",
            "rademacher",
            "--n",
            "64",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn rate_fit_reads_a_gap_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("N,gap,se\n");
    for n in [64.0f64, 256.0, 1024.0, 4096.0] {
        body.push_str(&format!("{n},{},0.001\n", 2.0 / n.sqrt()));
    }
    let gaps = dir.path().join("gaps.csv");
    std::fs::write(&gaps, body).unwrap();
    let o = disorder(dir.path(), &["rate-fit", gaps.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&read(dir.path(), "rate_fit.json")).unwrap();
    assert!((fit["loglog_slope"].as_f64().unwrap() + 0.5).abs() < 1e-12);
    assert!((fit["r2"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    std::fs::write(&gaps, "N,value\n1,2\n").unwrap();
    let o = disorder(dir.path(), &["rate-fit", gaps.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N,gap,se"));
}

#[test]
fn bad_configs_exit_with_two_and_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "master_seed = 1\n[model]\nhorizon = -1.0\n").unwrap();
    let o = disorder(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate-limit"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");

    let o = disorder(dir.path(), &["--set", "experiment.nonsense=1", "simulate-limit"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_writes_the_report_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let o = disorder(&out, &["--config", cfg.to_str().unwrap(), "verify"]);
    assert!(
        matches!(o.status.code(), Some(0) | Some(1)),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout
            .lines()
            .any(|l| l.starts_with("PASS coupling.exact_gaussian_zero")),
        "{stdout}"
    );
    for f in [
        "report.json",
        "timing.json",
        "provenance.json",
        "config.toml",
        "annealed_gaps.csv",
        "quenched_gaps.csv",
        "moment_profile.csv",
        "tightness.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_str(&read(&out, "report.json")).unwrap();
    assert_eq!(report["master_seed"], 7);
    // the written config reproduces the hash
    let prov: serde_json::Value = serde_json::from_str(&read(&out, "provenance.json")).unwrap();
    assert_eq!(prov["config_hash"], report["config_hash"]);
}
