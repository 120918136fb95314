//! `stickynet` batch runner. Each subcommand writes its CSV/JSON artifacts
//! plus the resolved `config.toml` into `--out`.
//!
//! Precedence: command-line flags, then `STICKYNET_SEED`, then the
//! `--config` file, then built-in defaults.

mod config;
mod output;
mod svg;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use stickynet::analytic::{self, StickyParams};
use stickynet::fractal::{self, DyadicGrid};
use stickynet::net_grid::{self, NetConfig};
use stickynet::{sampler, stats, verify, SeedSpec};

use config::ExperimentConfig;
use output::{num, OutDir};
use svg::Series;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Run(#[from] stickynet::Error),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Output(_) => 4,
            CliError::Run(_) | CliError::VerifyFailed(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stickynet", version, about = "Sticky Brownian motion and Brownian net experiments")]
struct Cli {
    #[arg(long, global = true, env = "STICKYNET_SEED")]
    seed: Option<u64>,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "stickynet-out")]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write SVG plots next to the CSVs.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate atoms and densities.
    Density {
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        y: Option<Vec<f64>>,
    },
    /// Sample gap paths through the time change.
    Sample {
        #[arg(long, value_parser = parse_count)]
        paths: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        grid_dt: Option<f64>,
    },
    /// Estimate p_n over a range of levels, next to the quadrature value.
    Pn {
        /// `4..10`, `4..=10` or a single level.
        #[arg(long, value_parser = parse_range)]
        n: Option<(u32, u32)>,
        #[arg(long, value_parser = parse_count)]
        reps: Option<u64>,
    },
    /// Lattice net run with special-time flags.
    Net {
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        branch_coeff: Option<f64>,
    },
    /// Box-counting slope of the Z flags.
    Dim {
        #[arg(long)]
        k_min: Option<u32>,
        #[arg(long)]
        k_max: Option<u32>,
        #[arg(long)]
        grids: Option<usize>,
    },
    /// Run the verification suite into verify.json.
    Verify {
        #[arg(long, value_parser = parse_count)]
        lemma_reps: Option<u64>,
    },
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("not a count: {s}"))
    }
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let bad = || format!("not a level range: {s}");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, CliError> {
    let Some(p) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}

fn apply_flags(cfg: &mut ExperimentConfig, cmd: &Command) {
    match cmd {
        Command::Density { t, x, y } => {
            if let Some(v) = t {
                cfg.density.t = v.clone();
            }
            if let Some(v) = x {
                cfg.density.x = v.clone();
            }
            if let Some(v) = y {
                cfg.density.y = v.clone();
            }
        }
        Command::Sample { paths, horizon, grid_dt } => {
            cfg.sample.paths = paths.unwrap_or(cfg.sample.paths);
            cfg.sample.horizon = horizon.unwrap_or(cfg.sample.horizon);
            cfg.sample.grid_dt = grid_dt.unwrap_or(cfg.sample.grid_dt);
        }
        Command::Pn { n, reps } => {
            if let Some((lo, hi)) = n {
                cfg.pn.n_min = *lo;
                cfg.pn.n_max = *hi;
            }
            cfg.pn.reps = reps.unwrap_or(cfg.pn.reps);
        }
        Command::Net { eps, level, branch_coeff } => {
            cfg.net.eps = eps.unwrap_or(cfg.net.eps);
            cfg.net.level = level.unwrap_or(cfg.net.level);
            cfg.net.branch_coeff = branch_coeff.unwrap_or(cfg.net.branch_coeff);
        }
        Command::Dim { k_min, k_max, grids } => {
            cfg.dim.k_min = k_min.unwrap_or(cfg.dim.k_min);
            cfg.dim.k_max = k_max.unwrap_or(cfg.dim.k_max);
            cfg.dim.grids = grids.unwrap_or(cfg.dim.grids);
        }
        Command::Verify { lemma_reps } => {
            cfg.verify.lemma_reps = lemma_reps.unwrap_or(cfg.verify.lemma_reps);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_ref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    apply_flags(&mut cfg, &cli.command);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let text = toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let out = OutDir::create(&cli.out, cfg.seed, &text)?;
    log::info!("seed {} config {} -> {}", cfg.seed, out.hash(), cli.out.display());
    match cli.command {
        Command::Density { .. } => density(&cfg, &out, cli.svg),
        Command::Sample { .. } => sample(&cfg, &out, cli.svg),
        Command::Pn { .. } => pn(&cfg, &out, cli.svg),
        Command::Net { .. } => net(&cfg, &out),
        Command::Dim { .. } => dim(&cfg, &out, cli.svg),
        Command::Verify { .. } => run_verify(&cfg, &out),
    }
}

fn density(cfg: &ExperimentConfig, out: &OutDir, svg: bool) -> Result<(), CliError> {
    let d = &cfg.density;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &t in &d.t {
        for &x in &d.x {
            let mut pts = Vec::new();
            for &y in &d.y {
                let (atom, pdf) = analytic::density_full(t, x, y)?;
                rows.push(vec![num(t), num(x), num(y), num(atom), num(pdf)]);
                pts.push((y, pdf));
            }
            series.push(Series { label: format!("t={t} x={x}"), points: pts });
        }
    }
    out.csv("density.csv", &["t", "x", "y", "atom", "pdf"], &rows)?;
    if svg {
        out.write_text("density.svg", &svg::line_plot("continuous density", "y", "pdf", &series))?;
    }
    Ok(())
}

fn sample(cfg: &ExperimentConfig, out: &OutDir, svg: bool) -> Result<(), CliError> {
    let s = &cfg.sample;
    let params = StickyParams::new(s.mu, s.theta)?;
    let base = SeedSpec::new(cfg.seed, 0);
    let paths = (0..s.paths)
        .into_par_iter()
        .map(|i| sampler::sample_d_path_timechange(s.horizon, s.grid_dt, params, &mut base.child(i).rng()))
        .collect::<stickynet::Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        for (t, v) in p.times.iter().zip(&p.values) {
            rows.push(vec![i.to_string(), num(*t), num(*v)]);
        }
    }
    out.csv("paths.csv", &["path", "time", "value"], &rows)?;
    if svg {
        let series: Vec<Series> = paths
            .iter()
            .take(6)
            .enumerate()
            .map(|(i, p)| Series {
                label: format!("path {i}"),
                points: p.times.iter().copied().zip(p.values.iter().copied()).collect(),
            })
            .collect();
        out.write_text("paths.svg", &svg::line_plot("gap paths", "t", "D", &series))?;
    }
    Ok(())
}

fn pn(cfg: &ExperimentConfig, out: &OutDir, svg: bool) -> Result<(), CliError> {
    let c = &cfg.pn;
    let grid = DyadicGrid::new(c.a, c.b)?;
    let seed = SeedSpec::new(cfg.seed, 0);
    let mut est = Vec::new();
    for n in c.n_min..=c.n_max {
        let e = fractal::estimate_pn(n, c.reps, &grid, seed)?;
        let a = fractal::analytic_pn(n, &grid)?;
        log::info!("n={n}: p_hat={} analytic={a}", e.p_hat);
        est.push((e, a));
    }
    let fit: Vec<_> = est.iter().filter(|(e, _)| e.p_hat > 0.0 && e.p_hat < 1.0).collect();
    let (ws, us) = if fit.len() >= 2 {
        let x: Vec<f64> = fit.iter().map(|(e, _)| e.n as f64).collect();
        let y: Vec<f64> = fit.iter().map(|(e, _)| e.p_hat.log2()).collect();
        // 1 / Var(log2 p_hat)
        let w: Vec<f64> = fit
            .iter()
            .map(|(e, _)| (e.p_hat * std::f64::consts::LN_2 / e.stderr).powi(2))
            .collect();
        (stats::weighted_slope(&x, &y, &w).0, stats::slope(&x, &y))
    } else {
        (f64::NAN, f64::NAN)
    };
    let rows: Vec<Vec<String>> = est
        .iter()
        .map(|(e, a)| {
            vec![
                e.n.to_string(),
                e.reps.to_string(),
                num(e.p_hat),
                num(e.stderr),
                num(e.ratio),
                num(*a),
                num(ws),
                num(us),
            ]
        })
        .collect();
    out.csv(
        "pn.csv",
        &["n", "reps", "p_hat", "stderr", "ratio_2n2", "analytic_pn", "weighted_slope", "unweighted_slope"],
        &rows,
    )?;
    if svg {
        let mc = est.iter().filter(|(e, _)| e.p_hat > 0.0).map(|(e, _)| (e.n as f64, e.p_hat.log2())).collect();
        let an = est.iter().map(|(e, a)| (e.n as f64, a.log2())).collect();
        let series = [Series { label: "Monte Carlo".into(), points: mc }, Series { label: "quadrature".into(), points: an }];
        out.write_text("pn.svg", &svg::line_plot("p_n", "n", "log2 p_n", &series))?;
    }
    Ok(())
}

fn net(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), CliError> {
    let c = &cfg.net;
    let nc = NetConfig { eps: c.eps, horizon: c.horizon, width: c.width, branch_coeff: c.branch_coeff };
    let grid = DyadicGrid::new(c.a, c.b)?;
    let report = net_grid::run_net(&nc, SeedSpec::new(cfg.seed, 0), c.start_half, &grid, c.level, c.stride)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                num(r.step as f64 * c.eps * c.eps),
                r.position_count.to_string(),
                r.min_gap.map_or(String::new(), |g| g.to_string()),
                (r.flagged_j1 as u8).to_string(),
                (r.flagged_j3 as u8).to_string(),
            ]
        })
        .collect();
    out.csv("net.csv", &["step", "time", "positions", "min_gap", "flag_j1", "flag_j3"], &rows)?;
    let mut flags = Vec::new();
    for (name, f) in [("J1", &report.j1), ("J3", &report.j3)] {
        for (j, v) in f.flagged.iter().enumerate() {
            flags.push(vec![
                name.to_string(),
                f.level.to_string(),
                j.to_string(),
                num(grid.t(f.level, j as u64)),
                (*v as u8).to_string(),
            ]);
        }
    }
    out.csv("flags.csv", &["kind", "level", "j", "t_start", "flagged"], &flags)?;
    Ok(())
}

fn dim(cfg: &ExperimentConfig, out: &OutDir, svg: bool) -> Result<(), CliError> {
    let c = &cfg.dim;
    let grid = DyadicGrid::new(c.a, c.b)?;
    let b = fractal::averaged_box_count(&grid, c.k_min, c.k_max, c.grids, SeedSpec::new(cfg.seed, 0))?;
    let rows: Vec<Vec<String>> = b
        .levels
        .iter()
        .zip(&b.counts)
        .map(|(k, n)| vec![k.to_string(), num(*n), num(b.weighted_slope), num(b.slope)])
        .collect();
    out.csv("dim.csv", &["level", "count", "weighted_slope", "unweighted_slope"], &rows)?;
    if svg {
        let pts = b.levels.iter().zip(&b.counts).map(|(k, n)| (*k as f64, n.log2())).collect();
        let series = [Series { label: "mean count".into(), points: pts }];
        out.write_text("dim.svg", &svg::line_plot("box counts", "level", "log2 N_k", &series))?;
    }
    Ok(())
}

fn run_verify(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), CliError> {
    let report = verify::run_all(&cfg.verify, cfg.seed);
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?;
    out.write_text("verify.json", &(json + "\n"))?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            let status = match c.status {
                verify::Status::Pass => "pass",
                verify::Status::Fail => "fail",
                verify::Status::Skipped => "skipped",
            };
            vec![c.name.clone(), status.into(), num(c.observed), num(c.expected), num(c.tolerance), c.detail.clone()]
        })
        .collect();
    out.csv("verify.csv", &["name", "status", "observed", "expected", "tolerance", "detail"], &rows)?;
    match report.failures() {
        0 => Ok(()),
        n => Err(CliError::VerifyFailed(n)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stickynet: {e}");
            ExitCode::from(e.code())
        }
    }
}
