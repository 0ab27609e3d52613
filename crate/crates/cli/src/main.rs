use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use disorder_core::config::{parse_config_with_overrides, ExperimentConfig};
use disorder_core::coupling::{k_tail_profile, CouplerKind};
use disorder_core::harness::{coupling_study_law, report::format_number, run_verify};
use disorder_core::limit::{simulate_annealed, simulate_limit_given_w};
use disorder_core::metrics::rate_fit;
use disorder_core::pdmp::simulate_pdmp;
use disorder_core::rng::{self, derive_seed, tag};
use disorder_core::{par, sample_environment, DisorderLaw};

#[derive(Parser, Debug)]
#[command(
    name = "disorder",
    version,
    about = "Particle systems in a random environment and their diffusive limit"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML). Defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "DISORDER_OUT", default_value = "disorder-out")]
    out: PathBuf,
    /// Config override, e.g. `--set experiment.n_paths=1000`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed, replacing `master_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one particle-system path in one environment draw.
    SimulatePdmp {
        /// Number of particles.
        #[arg(long)]
        n: usize,
        /// Replicate index; picks an independent environment and path.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Simulate one limit path, at a fixed `w` or with `W ~ N(0, sigma^2)`.
    SimulateLimit {
        /// Frozen environment value; omitted, `W` is drawn.
        #[arg(long, allow_hyphen_values = true)]
        w: Option<f64>,
        /// Step size; defaults to `experiment.dt`.
        #[arg(long)]
        dt: Option<f64>,
        /// Replicate index.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Sample the coupling constant K and fit its tail.
    Couple {
        /// exact-gaussian, naive-quantile or dyadic-kmt.
        #[arg(long, default_value = "dyadic-kmt")]
        coupler: CouplerKind,
        /// Size of each environment; a power of two for dyadic-kmt.
        #[arg(long, default_value_t = 16384)]
        n: usize,
        /// Defaults to `coupling.replicates`.
        #[arg(long)]
        replicates: Option<usize>,
        /// Disorder law; defaults to the one the coupler supports.
        #[arg(long)]
        law: Option<DisorderLaw>,
    },
    /// Run every enabled verification suite and write the report.
    Verify,
    /// Fit gap(N) = c (kr_init + ln N / sqrt N) to a gaps CSV.
    RateFit {
        /// CSV with columns N,gap,se and optionally kr_init.
        gaps: PathBuf,
    },
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_hash: String,
    master_seed: u64,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_config_with_overrides(&text, &common.overrides).with_context(|| match &common.config {
        Some(p) => format!("in config {}", p.display()),
        None => "in default config".to_string(),
    })?;
    if let Some(s) = common.seed {
        cfg.master_seed = s;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

fn write_provenance(dir: &Path, subcommand: &str, cfg: &ExperimentConfig) -> Result<()> {
    let p = Provenance {
        tool: "disorder",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
    };
    write_file(dir, "provenance.json", &serde_json::to_string_pretty(&p)?)?;
    Ok(())
}

fn simulate_pdmp_cmd(cfg: &ExperimentConfig, out: &Path, n: usize, replicate: u64) -> Result<()> {
    if n == 0 {
        bail!("--n must be positive");
    }
    let m = &cfg.model;
    let nn = n as u64;
    let env = sample_environment(m.law, n, derive_seed(cfg.master_seed, tag::ENVIRONMENT, nn, replicate))?;
    let x0 = m.init_particle.sample(
        n,
        &mut rng::stream(derive_seed(cfg.master_seed, tag::INIT, nn, replicate)),
    );
    let path = simulate_pdmp(m, &env, x0, derive_seed(cfg.master_seed, tag::PDMP, nn, replicate))?;
    let mut body = String::from("time,state,particle_index\n");
    // index 0 marks the start and end rows; jumps carry the 1-based particle
    body.push_str(&format!("0,{},0\n", format_number(path.x0)));
    for e in &path.events {
        body.push_str(&format!(
            "{},{},{}\n",
            format_number(e.time),
            format_number(e.post_state),
            e.particle + 1
        ));
    }
    let end = disorder_core::pdmp::path_value_at(&path, m.horizon)?;
    body.push_str(&format!("{},{},0\n", format_number(m.horizon), format_number(end)));
    let p = write_file(out, "pdmp_path.csv", &body)?;
    write_provenance(out, "simulate-pdmp", cfg)?;
    println!("{} jumps, X_T = {end}; wrote {}", path.events.len(), p.display());
    Ok(())
}

fn simulate_limit_cmd(
    cfg: &ExperimentConfig,
    out: &Path,
    w: Option<f64>,
    dt: Option<f64>,
    replicate: u64,
) -> Result<()> {
    let m = &cfg.model;
    let dt = dt.unwrap_or(cfg.experiment.dt);
    let seed = derive_seed(cfg.master_seed, tag::LIMIT, 0, replicate);
    let x0 = m.init_limit.sample(
        0,
        &mut rng::stream(derive_seed(cfg.master_seed, tag::LIMIT_INIT, 0, replicate)),
    );
    let path = match w {
        Some(w) => simulate_limit_given_w(m, w, x0, dt, seed)?,
        None => simulate_annealed(m, x0, dt, seed)?,
    };
    let mut body = String::from("time,state\n");
    for (k, x) in path.states.iter().enumerate() {
        body.push_str(&format!("{},{}\n", format_number(path.grid.time(k)), format_number(*x)));
    }
    let p = write_file(out, "limit_path.csv", &body)?;
    write_provenance(out, "simulate-limit", cfg)?;
    println!(
        "w = {}, X_T = {}; wrote {}",
        path.w_used,
        path.states.last().unwrap(),
        p.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct KFit {
    coupler: String,
    gamma_hat: f64,
    lambda_hat: f64,
    r2: f64,
    degenerate: bool,
    n: usize,
    replicates: usize,
}

fn couple_cmd(
    cfg: &ExperimentConfig,
    out: &Path,
    coupler: CouplerKind,
    n: usize,
    replicates: Option<usize>,
    law: Option<DisorderLaw>,
) -> Result<()> {
    let law = law.unwrap_or_else(|| coupling_study_law(coupler, cfg.model.law));
    let reps = replicates.unwrap_or(cfg.coupling.replicates);
    let seed = derive_seed(cfg.master_seed, tag::COUPLING, n as u64, 0);
    let prof = k_tail_profile(coupler, law, n, reps, seed)?;
    let mut body = String::from("x,tail_freq\n");
    for (x, p) in prof.x_grid.iter().zip(&prof.tail_freq) {
        body.push_str(&format!("{},{}\n", format_number(*x), format_number(*p)));
    }
    write_file(out, "k_tail.csv", &body)?;
    let fit = KFit {
        coupler: coupler.to_string(),
        gamma_hat: prof.gamma_hat,
        lambda_hat: prof.lambda_hat,
        r2: prof.r2,
        degenerate: prof.degenerate,
        n,
        replicates: reps,
    };
    write_file(out, "k_fit.json", &serde_json::to_string_pretty(&fit)?)?;
    write_provenance(out, "couple", cfg)?;
    println!(
        "{coupler} N={n}: median K = {}, gamma_hat = {}, lambda_hat = {}, r2 = {}",
        disorder_core::stats::median(&prof.k_values),
        prof.gamma_hat,
        prof.lambda_hat,
        prof.r2
    );
    Ok(())
}

#[derive(Serialize)]
struct FitJson {
    c_hat: f64,
    loglog_slope: Option<f64>,
    r2: Option<f64>,
}

fn rate_fit_cmd(out: &Path, gaps: &Path) -> Result<()> {
    let mut rdr = csv::Reader::from_path(gaps).with_context(|| format!("reading {}", gaps.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(i_n), Some(i_gap), Some(i_se)) = (col("N"), col("gap"), col("se")) else {
        bail!(
            "{}: expected columns N,gap,se[,kr_init,theory_regressor]",
            gaps.display()
        );
    };
    let i_kr = col("kr_init");
    let (mut ns, mut gs, mut ses, mut krs) = (vec![], vec![], vec![], vec![]);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .with_context(|| format!("{}: row {}: bad number", gaps.display(), line + 2))
        };
        ns.push(num(i_n)?);
        gs.push(num(i_gap)?);
        ses.push(num(i_se)?);
        if let Some(i) = i_kr {
            krs.push(num(i)?);
        }
    }
    let fit = rate_fit(&ns, &gs, &ses, i_kr.map(|_| krs.as_slice()))?;
    let json = FitJson {
        c_hat: fit.c_hat,
        loglog_slope: fit.loglog_slope,
        r2: fit.r2,
    };
    let p = write_file(out, "rate_fit.json", &serde_json::to_string_pretty(&json)?)?;
    match fit.loglog_slope {
        Some(s) => println!(
            "loglog slope {s}, c_hat {}{}",
            fit.c_hat,
            if fit.degenerate { " (degenerate)" } else { "" }
        ),
        None => println!("loglog slope undefined (degenerate fit), c_hat {}", fit.c_hat),
    }
    println!("wrote {}", p.display());
    Ok(())
}

fn verify_cmd(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<bool> {
    let report = run_verify(cfg, threads)?;
    report.write_to(out)?;
    write_provenance(out, "verify", cfg)?;
    write_file(out, "config.toml", &cfg.to_toml()?)?;
    print!("{}", report.summary());
    println!("report written to {}", out.display());
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    let threads = cli.common.threads.unwrap_or(cfg.threads);
    let out = cli.common.out.as_path();
    par::with_threads(threads, || -> Result<bool> {
        match cli.command {
            Command::SimulatePdmp { n, replicate } => simulate_pdmp_cmd(&cfg, out, n, replicate)?,
            Command::SimulateLimit { w, dt, replicate } => simulate_limit_cmd(&cfg, out, w, dt, replicate)?,
            Command::Couple {
                coupler,
                n,
                replicates,
                law,
            } => couple_cmd(&cfg, out, coupler, n, replicates, law)?,
            Command::Verify => return verify_cmd(&cfg, out, threads),
            Command::RateFit { gaps } => rate_fit_cmd(out, &gaps)?,
        }
        Ok(true)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
