//! Numeric identity checks across the analytic laws and the samplers.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, MixedLaw, StickyParams};
use crate::error::Result;
use crate::fractal::{self, DyadicGrid};
use crate::quad;
use crate::sampler;
use crate::seed::SeedSpec;
use crate::special::erf;
use crate::stats;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    /// Pass iff `|observed - expected| <= tolerance`.
    pub fn compare(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        let ok = (observed - expected).abs() <= tolerance;
        Self::with_status(name, ok, observed, expected, tolerance, detail)
    }

    pub fn with_status(
        name: impl Into<String>,
        ok: bool,
        observed: f64,
        expected: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            observed,
            expected,
            tolerance,
            detail: detail.into(),
        }
    }

    fn from_error(name: impl Into<String>, e: crate::Error) -> Self {
        Self::with_status(name, false, f64::NAN, f64::NAN, 0.0, format!("error: {e}"))
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// `atom + ∫pdf = 1` at each `t`.
pub fn check_normalization(t_grid: &[f64]) -> Vec<CheckResult> {
    t_grid
        .iter()
        .map(|&t| {
            let name = format!("normalization/t={t:e}");
            match MixedLaw::new(t, 0.0) {
                Ok(law) => {
                    let q = law.continuous_integral(1e-13);
                    CheckResult::compare(
                        name,
                        law.atom + q.value,
                        1.0,
                        1e-9,
                        format!("atom {:.9}, quadrature error {:.1e}, tail bound {:.1e}", law.atom, q.error, law.tail_bound()),
                    )
                }
                Err(e) => CheckResult::from_error(name, e),
            }
        })
        .collect()
}

/// `2√2·A(t,x) = ρ(t,x,0⁺)`.
pub fn check_boundary(t_grid: &[f64], x_grid: &[f64]) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for &t in t_grid {
        for &x in x_grid {
            let lhs = 2.0 * SQRT_2 * analytic::atom(t, x);
            let rhs = analytic::pdf(t, x, 0.0);
            out.push(CheckResult::compare(format!("boundary/t={t:e}/x={x}"), rhs, lhs, 1e-8, "rho(t,x,0+) vs 2*sqrt2*A"));
        }
    }
    out
}

/// `∫₀^∞ e^{-λt} f(t) dt` with `t = u²`.
fn laplace<F: Fn(f64) -> f64>(lambda: f64, f: F) -> quad::QuadResult {
    quad::integrate_to_inf(|u: f64| 2.0 * u * (-lambda * u * u).exp() * f(u * u), 0.0, 1e-13, 1e-12)
}

/// Time-domain transforms of the atom and density against the resolvent.
pub fn check_laplace(lambdas: &[f64], y_grid: &[f64]) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for &l in lambdas {
        let r = match analytic::resolvent(l, StickyParams::left_right()) {
            Ok(r) => r,
            Err(e) => {
                out.push(CheckResult::from_error(format!("laplace/lambda={l}"), e));
                continue;
            }
        };
        let a = laplace(l, |t| analytic::atom(t, 0.0));
        let closed = 1.0 / (l + 2.0 * (l + 1.0).sqrt() + 2.0);
        out.push(CheckResult::compare(
            format!("laplace/lambda={l}/atom"),
            a.value,
            closed,
            1e-6,
            format!("resolvent atom {:.15}", r.atom_coeff),
        ));
        for &y in y_grid {
            let q = laplace(l, |t| analytic::pdf(t, 0.0, y));
            out.push(CheckResult::compare(
                format!("laplace/lambda={l}/y={y}"),
                q.value,
                r.density(y),
                1e-5,
                format!("quadrature error {:.1e}", q.error),
            ));
        }
    }
    // λ·(transform of the atom) → A(0) = 1
    let big = 1e8;
    let r = analytic::resolvent(big, StickyParams::left_right()).expect("positive lambda");
    out.push(CheckResult::compare("laplace/large-lambda", big * r.atom_coeff, 1.0, 1e-3, "lambda * atom transform"));
    out
}

fn rho(t: f64, x: f64, y: f64) -> f64 {
    analytic::pdf(t, x, y)
}

/// Max over the grid of the centered forward-equation residual at step `h`.
fn pde_residual(t_grid: &[f64], x_grid: &[f64], y_grid: &[f64], h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        for &x in x_grid {
            for &y in y_grid {
                let dt = (rho(t + h, x, y) - rho(t - h, x, y)) / (2.0 * h);
                let (up, mid, dn) = (rho(t, x, y + h), rho(t, x, y), rho(t, x, y - h));
                let dy = (up - dn) / (2.0 * h);
                let dyy = (up - 2.0 * mid + dn) / (h * h);
                worst = worst.max((dt - 0.5 * dyy + SQRT_2 * dy).abs());
            }
        }
    }
    worst
}

/// Forward equation by finite differences (second-order ratio test), the
/// atom balance `∂_t A = -√2ρ(x,0) + ½∂_yρ(x,0)` and the far field.
pub fn check_pde_residual(t_grid: &[f64], x_grid: &[f64], y_grid: &[f64], h: f64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let r1 = pde_residual(t_grid, x_grid, y_grid, h);
    let r2 = pde_residual(t_grid, x_grid, y_grid, h / 2.0);
    out.push(CheckResult::compare(
        "pde/residual-ratio",
        r1 / r2,
        4.0,
        0.5,
        format!("max residual {r1:.3e} at h={h}, {r2:.3e} at h/2"),
    ));
    // fourth-order centered in t, third-order one-sided in y
    let e = 1e-3;
    for &t in t_grid {
        for &x in x_grid {
            let a = |s: f64| analytic::atom(t + s * e, x);
            let da = (a(-2.0) - 8.0 * a(-1.0) + 8.0 * a(1.0) - a(2.0)) / (12.0 * e);
            let r = |k: f64| rho(t, x, k * e);
            let r0 = r(0.0);
            let dy0 = (-11.0 * r0 + 18.0 * r(1.0) - 9.0 * r(2.0) + 2.0 * r(3.0)) / (6.0 * e);
            out.push(CheckResult::compare(
                format!("pde/atom-balance/t={t}/x={x}"),
                da,
                -SQRT_2 * r0 + 0.5 * dy0,
                1e-6,
                "dA/dt vs boundary flux",
            ));
        }
    }
    let far = pde_residual(&[0.01], &[0.0], &[10.0], h);
    out.push(CheckResult::with_status("pde/far-field", far < 1e-12, far, 0.0, 1e-12, "y=10, t=0.01"));
    out
}

/// `M_T` and `X_T` at an independent `Exp(λ)` time for drift `μ`:
/// `M_T ~ Exp(√(2a)+μ)` and `X_T ~ Exp(√(2a)-μ)`, `a = λ + μ²/2`.
pub fn check_lemma_mt2_xt2(lambda: f64, mu: f64, reps: u64, seed: SeedSpec) -> Vec<CheckResult> {
    let tag = format!("lemma/mu={mu:.4}/lambda={lambda}");
    let s = (2.0 * lambda + mu * mu).sqrt();
    let batches = reps.div_ceil(fractal::BATCH);
    let draws: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = seed.child(b).rng();
            let len = fractal::BATCH.min(reps - b * fractal::BATCH);
            (0..len).map(|_| sampler::sample_mt2_xt2(lambda, mu, &mut rng)).collect::<Vec<_>>()
        })
        .collect();
    let n = draws.len() as f64;
    let rate_m = n / draws.iter().map(|d| d.0).sum::<f64>();
    let want_m = s + mu;
    let mut xs: Vec<f64> = draws.iter().map(|d| d.1).collect();
    xs.sort_by(f64::total_cmp);
    let rate_x = 2.0 * lambda / (s + mu);
    let d = stats::ks_statistic(&xs, |y| if y <= 0.0 { 0.0 } else { -(-rate_x * y).exp_m1() });
    let crit = stats::ks_critical(xs.len());
    vec![
        CheckResult::compare(format!("{tag}/m-rate"), rate_m, want_m, 0.01 * want_m, format!("{} draws, MLE rate", xs.len())),
        CheckResult::with_status(format!("{tag}/x-ks"), d < crit, d, 0.0, crit, format!("KS vs Exp({rate_x:.6})")),
    ]
}

/// Survival of the drifted motion in `(2^-n, 1/n)` over `t_n` from
/// `z√t_n` against `erf(z/√2)`: the gap must shrink with `n` and end
/// below 0.01.
pub fn check_u_limit(z_list: &[f64], n_range: std::ops::RangeInclusive<u32>) -> Vec<CheckResult> {
    let grid = DyadicGrid::new(0.0, 1.0).expect("unit grid");
    let mut out = Vec::new();
    for &z in z_list {
        let target = erf(z / SQRT_2);
        let gaps: Result<Vec<f64>> = n_range
            .clone()
            .map(|n| {
                let t = grid.t_n(n);
                let nf = n as f64;
                let u = analytic::exit_survival(t, z * t.sqrt(), (-nf).exp2(), 1.0 / nf, SQRT_2)?;
                Ok((u - target).abs())
            })
            .collect();
        let name = format!("u-limit/z={z}");
        match gaps {
            Ok(g) => {
                let last = *g.last().unwrap_or(&f64::NAN);
                let monotone = g.windows(2).all(|w| w[1] <= w[0]);
                out.push(CheckResult::with_status(
                    name,
                    monotone && last < 0.01,
                    last,
                    0.0,
                    0.01,
                    format!("gap at n={}..={}: {:.3e} -> {last:.3e}, monotone {monotone}", n_range.start(), n_range.end(), g[0]),
                ));
            }
            Err(e) => out.push(CheckResult::from_error(name, e)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub t_grid: Vec<f64>,
    pub boundary_x: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub laplace_y: Vec<f64>,
    pub pde_t: Vec<f64>,
    pub pde_x: Vec<f64>,
    pub pde_y: Vec<f64>,
    pub pde_h: f64,
    pub lemma_cases: Vec<(f64, f64)>,
    pub lemma_reps: u64,
    pub u_z: Vec<f64>,
    pub u_n_min: u32,
    pub u_n_max: u32,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let t_grid = (0..20).map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 19.0)).collect();
        Self {
            t_grid,
            boundary_x: vec![0.0, 0.5, 2.0],
            lambdas: vec![0.5, 1.0, 2.0],
            laplace_y: vec![0.1, 0.5, 1.0, 3.0],
            pde_t: vec![0.05, 0.3, 1.0],
            pde_x: vec![0.0, 0.5],
            pde_y: vec![0.2, 0.7, 1.5],
            pde_h: 1e-3,
            lemma_cases: vec![(0.0, 1.0), (SQRT_2, 1.0), (SQRT_2, 0.5)],
            lemma_reps: 1_000_000,
            u_z: vec![0.5, 1.0, 2.0],
            u_n_min: 8,
            u_n_max: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version: u32,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }
}

/// Every check, run in parallel and sorted by name.
pub fn run_all(config: &VerifyConfig, seed: u64) -> VerifyReport {
    type Job<'a> = Box<dyn Fn() -> Vec<CheckResult> + Send + Sync + 'a>;
    let c = config;
    let mut jobs: Vec<Job> = vec![
        Box::new(|| check_normalization(&c.t_grid)),
        Box::new(|| check_boundary(&c.t_grid, &c.boundary_x)),
        Box::new(|| check_laplace(&c.lambdas, &c.laplace_y)),
        Box::new(|| check_pde_residual(&c.pde_t, &c.pde_x, &c.pde_y, c.pde_h)),
        Box::new(|| check_u_limit(&c.u_z, c.u_n_min..=c.u_n_max)),
    ];
    for (i, &(mu, lambda)) in c.lemma_cases.iter().enumerate() {
        let s = SeedSpec::new(seed, 0).child(i as u64);
        jobs.push(Box::new(move || check_lemma_mt2_xt2(lambda, mu, c.lemma_reps, s)));
    }
    let mut checks: Vec<CheckResult> = jobs.par_iter().flat_map_iter(|j| j()).collect();
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    VerifyReport { version: REPORT_VERSION, seed, checks }
}
