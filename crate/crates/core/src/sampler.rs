//! Samplers for the sticky gap process `D` and the left-right pair.
//!
//! Exact increments of `D` come from one of two routes that draw from the
//! same law:
//! * start points on the `1e-4` grid use the inverse CDF of a 2048-knot
//!   monotone cubic table (cached per `(x, dt)`);
//! * any other start point uses an exact rejection sampler built from the
//!   last-exit decomposition of the density from 0 and the strong Markov
//!   property at the hitting time of 0.
//!
//! The route depends only on the arguments, never on cache state, so draws
//! are reproducible from the seed alone.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytic::{self, StickyParams};
use crate::error::{domain, Result};
use crate::quad::gk15;
use crate::seed::SeedSpec;
use crate::special::{exp_norm_cdf, norm_cdf};

pub const TABLE_KNOTS: usize = 2048;
pub const GRID_STEP: f64 = 1e-4;
const CACHE_CAPACITY: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub l: f64,
    pub r: f64,
    pub met: bool,
}

impl PairState {
    pub fn new(l: f64, r: f64) -> Self {
        Self { l, r, met: false }
    }

    pub fn gap(&self) -> f64 {
        (self.r - self.l) / SQRT_2
    }
}

#[inline]
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

/// Monotone cubic interpolant of the conditional CDF of the continuous part.
#[derive(Debug, Clone)]
pub struct CdfTable {
    pub x: f64,
    pub dt: f64,
    pub atom: f64,
    lo: f64,
    h: f64,
    cdf: Vec<f64>,
    slope: Vec<f64>,
}

impl CdfTable {
    pub fn new(x: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(x >= 0.0) {
            return domain(format!("need dt > 0 and x >= 0, got dt={dt}, x={x}"));
        }
        let sd = dt.sqrt();
        let lo = if x <= 12.0 * sd { 0.0 } else { x - 12.0 * sd };
        let hi = x + SQRT_2 * dt + 12.0 * sd;
        let n = TABLE_KNOTS;
        let h = (hi - lo) / (n - 1) as f64;
        let f = |y: f64| analytic::pdf(dt, x, y);
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            let a = lo + (i - 1) as f64 * h;
            cdf[i] = cdf[i - 1] + gk15(&f, a, a + h).0;
        }
        let total = cdf[n - 1];
        if !(total > 0.0) {
            return domain(format!("continuous part has no mass at x={x}, dt={dt}"));
        }
        for c in cdf.iter_mut() {
            *c /= total;
        }
        let mut slope: Vec<f64> = (0..n).map(|i| f(lo + i as f64 * h) / total * h).collect();
        // Fritsch-Carlson limiter, slopes in units of the knot spacing.
        for i in 0..n - 1 {
            let d = cdf[i + 1] - cdf[i];
            if d <= 0.0 {
                slope[i] = 0.0;
                slope[i + 1] = 0.0;
                continue;
            }
            let (a, b) = (slope[i] / d, slope[i + 1] / d);
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slope[i] = tau * a * d;
                slope[i + 1] = tau * b * d;
            }
        }
        Ok(Self { x, dt, atom: analytic::atom(dt, x), lo, h, cdf, slope })
    }

    fn hermite(&self, i: usize, s: f64) -> (f64, f64) {
        let (p0, p1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.slope[i], self.slope[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * p1
            + (s3 - s2) * m1;
        let dv = (6.0 * s2 - 6.0 * s) * p0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * p1
            + (3.0 * s2 - 2.0 * s) * m1;
        (v, dv)
    }

    /// Interpolated conditional CDF of the continuous part.
    pub fn cdf(&self, y: f64) -> f64 {
        let pos = (y - self.lo) / self.h;
        if pos <= 0.0 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i >= self.cdf.len() - 1 {
            return 1.0;
        }
        self.hermite(i, pos - i as f64).0
    }

    /// Inverse of `cdf`, to `1e-12` in probability.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = match self.cdf.partition_point(|&c| c <= u) {
            0 => 0,
            k => (k - 1).min(self.cdf.len() - 2),
        };
        let (mut a, mut b) = (0.0, 1.0);
        let mut s = if self.cdf[i + 1] > self.cdf[i] {
            ((u - self.cdf[i]) / (self.cdf[i + 1] - self.cdf[i])).clamp(0.0, 1.0)
        } else {
            0.5
        };
        for _ in 0..60 {
            let (v, dv) = self.hermite(i, s);
            let g = v - u;
            if g.abs() < 1e-13 {
                break;
            }
            if g > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let next = s - g / dv;
            s = if dv > 0.0 && next > a && next < b { next } else { 0.5 * (a + b) };
            if b - a < 1e-15 {
                break;
            }
        }
        (self.lo + (i as f64 + s) * self.h).max(0.0)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.atom {
            return 0.0;
        }
        self.quantile(rng.random::<f64>())
    }
}

pub fn on_grid(x: f64) -> bool {
    x >= 0.0 && (x / GRID_STEP).round() * GRID_STEP == x
}

/// Exact increments of `D` with a bounded table cache.
#[derive(Debug, Default)]
pub struct IncrementSampler {
    cache: RwLock<HashMap<(u64, u64), Arc<CdfTable>>>,
}

impl IncrementSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide shared instance.
    pub fn global() -> &'static IncrementSampler {
        static GLOBAL: OnceLock<IncrementSampler> = OnceLock::new();
        GLOBAL.get_or_init(IncrementSampler::new)
    }

    pub fn table(&self, x: f64, dt: f64) -> Result<Arc<CdfTable>> {
        let key = (x.to_bits(), dt.to_bits());
        if let Some(t) = self.cache.read().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(CdfTable::new(x, dt)?);
        let mut cache = self.cache.write().unwrap();
        if cache.len() < CACHE_CAPACITY {
            cache.insert(key, t.clone());
        }
        Ok(t)
    }

    pub fn cached(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn draw<R: Rng + ?Sized>(&self, x: f64, dt: f64, rng: &mut R) -> Result<f64> {
        if !(dt > 0.0) || !dt.is_finite() {
            return domain(format!("dt must be positive, got {dt}"));
        }
        if !(x >= 0.0) || !x.is_finite() {
            return domain(format!("x must be nonnegative, got {x}"));
        }
        if on_grid(x) {
            Ok(self.table(x, dt)?.draw(rng))
        } else {
            Ok(exact_increment(x, dt, rng))
        }
    }
}

/// One exact draw of `D_{dt}` given `D_0 = x`.
pub fn sample_d_increment(x: f64, dt: f64, seed: SeedSpec) -> Result<f64> {
    IncrementSampler::global().draw(x, dt, &mut seed.rng())
}

/// `G(u) = ∫₀^∞ y/√(2πu³) e^{-(y-μu)²/2u} dy`.
fn entrance_mass(u: f64) -> f64 {
    let c = SQRT_2 * u.sqrt();
    SQRT_2 * norm_cdf(c) + (-0.5 * c * c).exp() / (2.0 * PI * u).sqrt()
}

/// Continuous part of `D_s` from 0, drawn exactly by rejection. The density
/// is `2θ ∫₀^s A(s-u) g(u, y) du`: `s-u` is the time spent before the last
/// departure from 0 and `g` is the entrance law of the final excursion.
pub fn continuous_from_zero<R: Rng + ?Sized>(s: f64, rng: &mut R) -> f64 {
    let mu = SQRT_2;
    let w_uniform = mu * s;
    let w_root = (2.0 * s / PI).sqrt();
    let u = loop {
        let u = if rng.random::<f64>() * (w_uniform + w_root) < w_uniform {
            s * unit_open(rng)
        } else {
            let v = unit_open(rng);
            s * v * v
        };
        let envelope = mu + 1.0 / (2.0 * PI * u).sqrt();
        let accept = entrance_mass(u) / envelope * analytic::atom(s - u, 0.0);
        if rng.random::<f64>() < accept {
            break u;
        }
    };
    // y = w√u with w ∝ w φ(w - c) on w > 0.
    let c = mu * u.sqrt();
    let mass_a = c * norm_cdf(c);
    let mass_b = 1.0 / (2.0 * PI).sqrt();
    let w = loop {
        let w = if rng.random::<f64>() * (mass_a + mass_b) < mass_a {
            loop {
                let w = c + normal(rng);
                if w > 0.0 {
                    break w;
                }
            }
        } else {
            {
            let e: f64 = Exp1.sample(rng);
            c + (2.0 * e).sqrt()
        }
        };
        if rng.random::<f64>() * (c + (w - c).max(0.0)) < w {
            break w;
        }
    };
    w * u.sqrt()
}

/// Hitting time of 0 from `x` for √2-drifted motion, conditioned to occur
/// before `t`; inverse CDF by bisection.
fn hitting_time_before<R: Rng + ?Sized>(x: f64, t: f64, rng: &mut R) -> f64 {
    let cdf = |s: f64| {
        let rs = s.sqrt();
        norm_cdf((SQRT_2 * s - x) / rs) + exp_norm_cdf(2.0 * SQRT_2 * x, -(SQRT_2 * s + x) / rs)
    };
    let target = rng.random::<f64>() * cdf(t);
    let (mut a, mut b) = (0.0, t);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if cdf(m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Exact draw of `D_t` given `D_0 = x` without tables.
pub fn exact_increment<R: Rng + ?Sized>(x: f64, t: f64, rng: &mut R) -> f64 {
    let mut rest = t;
    if x > 0.0 {
        let y = x + SQRT_2 * t + t.sqrt() * normal(rng);
        if y > 0.0 && rng.random::<f64>() >= (-2.0 * x * y / t).exp() {
            return y;
        }
        rest = t - hitting_time_before(x, t, rng);
        if !(rest > 0.0) {
            return 0.0;
        }
    }
    if rng.random::<f64>() < analytic::atom(rest, 0.0) {
        0.0
    } else {
        continuous_from_zero(rest, rng)
    }
}

/// Sticky process through the time change of a reflected drifted motion.
/// The motion runs on a `grid_dt/4` clock with exact bridge minima; each
/// new minimum adds `ΔM/θ` of real time spent at 0. The real-time path is
/// linearly interpolated onto the uniform `grid_dt` grid.
pub fn sample_d_path_timechange<R: Rng + ?Sized>(
    horizon: f64,
    grid_dt: f64,
    params: StickyParams,
    rng: &mut R,
) -> Result<SamplePath> {
    if !(horizon > 0.0) || !(grid_dt > 0.0) || grid_dt > horizon {
        return domain(format!("need 0 < grid_dt <= horizon, got grid_dt={grid_dt}, horizon={horizon}"));
    }
    let h = grid_dt / 4.0;
    let sh = h.sqrt();
    let StickyParams { mu, theta } = params;
    let mut kt = vec![0.0];
    let mut kv = vec![0.0];
    let (mut y, mut run_min, mut t) = (0.0_f64, 0.0_f64, 0.0_f64);
    while t < horizon {
        let y1 = y + mu * h + sh * normal(rng);
        let d = y1 - y;
        let bm = 0.5 * (y + y1 - (d * d - 2.0 * h * unit_open(rng).ln()).sqrt());
        let new_min = run_min.min(bm);
        let dm = run_min - new_min;
        let x1 = y1 - new_min;
        if dm > 0.0 {
            let stuck = dm / theta;
            kt.push(t + 0.5 * h);
            kv.push(0.0);
            kt.push(t + 0.5 * h + stuck);
            kv.push(0.0);
            t += h + stuck;
        } else {
            t += h;
        }
        kt.push(t);
        kv.push(x1);
        y = y1;
        run_min = new_min;
    }
    let n = (horizon / grid_dt).round() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut j = 0;
    for i in 0..=n {
        let s = (i as f64 * grid_dt).min(horizon);
        while j + 1 < kt.len() && kt[j + 1] < s {
            j += 1;
        }
        let v = if j + 1 >= kt.len() {
            kv[j]
        } else {
            let (t0, t1) = (kt[j], kt[j + 1]);
            let (v0, v1) = (kv[j], kv[j + 1]);
            if v0 == 0.0 && v1 == 0.0 {
                0.0
            } else if t1 > t0 {
                v0 + (v1 - v0) * (s - t0) / (t1 - t0)
            } else {
                v1
            }
        };
        times.push(s);
        values.push(v.max(0.0));
    }
    Ok(SamplePath { times, values })
}

/// `D` below this counts as "together" for the pair stepper.
pub fn stick_band(dt: f64) -> f64 {
    dt.sqrt() / 10.0
}

/// One step of the left-right pair. Before meeting, `L` and `R` take
/// independent Euler steps with drifts `∓1`; a gap inside the band or a
/// sign change counts as meeting. After meeting the gap is itself Markov,
/// so it moves by an exact sticky increment and the midpoint by a Gaussian
/// whose variance accounts for the expected time at 0.
pub fn euler_pair_step<R: Rng + ?Sized>(
    state: PairState,
    dt: f64,
    sampler: &IncrementSampler,
    rng: &mut R,
) -> Result<PairState> {
    if !(dt > 0.0) {
        return domain(format!("dt must be positive, got {dt}"));
    }
    let d = state.gap();
    let mid = 0.5 * (state.l + state.r);
    if state.met || (d >= 0.0 && d < stick_band(dt)) {
        let d0 = d.max(0.0);
        let d1 = sampler.draw(d0, dt, rng)?;
        let stuck = analytic::atom(dt, d0) * dt;
        let m1 = mid + (0.5 * dt + 0.5 * stuck).sqrt() * normal(rng);
        let half = d1 / SQRT_2;
        return Ok(PairState { l: m1 - half, r: m1 + half, met: true });
    }
    let sd = dt.sqrt();
    let l = state.l + sd * normal(rng) - dt;
    let r = state.r + sd * normal(rng) + dt;
    let crossed = (r - l) * (state.r - state.l) <= 0.0;
    if crossed && r < l {
        let m = 0.5 * (l + r);
        return Ok(PairState { l: m, r: m, met: true });
    }
    Ok(PairState { l, r, met: crossed })
}

/// `P[max of the bridge from a to b over time dt exceeds level c]`, with
/// `a, b < c`.
#[inline]
pub(crate) fn bridge_cross(a: f64, b: f64, c: f64, dt: f64) -> f64 {
    (-2.0 * (c - a) * (c - b) / dt).exp()
}

/// Drifted Brownian motion on `n_substeps` steps; true iff it stays in
/// `(lo, hi)` up to `t`. `bridge` enables the per-step crossing correction.
pub fn exit_indicator<R: Rng + ?Sized>(
    y0: f64,
    lo: f64,
    hi: f64,
    t: f64,
    drift: f64,
    n_substeps: usize,
    bridge: bool,
    rng: &mut R,
) -> bool {
    if !(y0 > lo && y0 < hi) {
        return false;
    }
    let dt = t / n_substeps.max(1) as f64;
    let sd = dt.sqrt();
    let mut y = y0;
    for _ in 0..n_substeps.max(1) {
        let y1 = y + drift * dt + sd * normal(rng);
        if y1 <= lo || y1 >= hi {
            return false;
        }
        if bridge {
            let p_lo = bridge_cross(-y, -y1, -lo, dt);
            let p_hi = bridge_cross(y, y1, hi, dt);
            let p = 1.0 - (1.0 - p_lo) * (1.0 - p_hi);
            if rng.random::<f64>() < p {
                return false;
            }
        }
        y = y1;
    }
    true
}

pub fn sample_exit_indicator(
    y0: f64,
    lo: f64,
    hi: f64,
    t: f64,
    drift: f64,
    n_substeps: usize,
    seed: SeedSpec,
) -> Result<bool> {
    if !(lo < hi) {
        return domain(format!("need lo < hi, got lo={lo}, hi={hi}"));
    }
    Ok(exit_indicator(y0, lo, hi, t, drift, n_substeps, true, &mut seed.rng()))
}

/// Running infimum magnitude `M_T` and reflected value `X_T` of `B + μs`
/// at an independent `Exp(λ)` time `T`.
pub fn sample_mt2_xt2<R: Rng + ?Sized>(lambda: f64, mu: f64, rng: &mut R) -> (f64, f64) {
    let tt: f64 = Exp1.sample(rng);
    let tt = tt / lambda;
    let y = mu * tt + tt.sqrt() * normal(rng);
    let low = 0.5 * (y - (y * y - 2.0 * tt * unit_open(rng).ln()).sqrt());
    let m = -low.min(0.0);
    (m, y + m)
}
