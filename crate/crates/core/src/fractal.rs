//! The special-time fractal: the `Z(I)` family on dyadic intervals, `p_n`
//! and its scaling, variance checks, box counting and dyadic separation.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{domain, Error, Result};
use crate::quad;
use crate::sampler::{self, bridge_cross, normal, IncrementSampler};
use crate::seed::SeedSpec;
use crate::stats;

/// Phase-two substeps per interval.
pub const SUBSTEPS: usize = 64;
/// Draws per parallel batch; each batch owns one stream.
pub const BATCH: u64 = 10_000;
/// One-sided 99% normal quantile.
const Z99: f64 = 2.3263478740408408;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub a: f64,
    pub b: f64,
}

impl DyadicGrid {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return domain(format!("need finite a < b, got a={a}, b={b}"));
        }
        Ok(Self { a, b })
    }

    /// `t_k^j`.
    pub fn t(&self, k: u32, j: u64) -> f64 {
        self.a + (self.b - self.a) * j as f64 * (-(k as f64)).exp2()
    }

    /// Length of a level-`n` interval.
    pub fn t_n(&self, n: u32) -> f64 {
        (self.b - self.a) * (-(n as f64)).exp2()
    }
}

fn check_level(n: u32) -> Result<()> {
    if n < 2 {
        return domain(format!("level must be at least 2, got {n}"));
    }
    if n > 40 {
        return domain(format!("level {n} is beyond the supported range"));
    }
    Ok(())
}

/// `(2^-n, 2^-n/4)` for the endpoint, `(2^-n, 1/n)` for the run.
fn windows(n: u32) -> (f64, f64, f64) {
    let nf = n as f64;
    ((-nf).exp2(), (-nf / 4.0).exp2(), 1.0 / nf)
}

pub fn z_indicator_rng<R: Rng + ?Sized>(
    n: u32,
    grid: &DyadicGrid,
    sampler: &IncrementSampler,
    rng: &mut R,
) -> Result<bool> {
    check_level(n)?;
    let t = grid.t_n(n);
    let (lo, top, hi) = windows(n);
    let y = sampler.draw(0.0, t, rng)?;
    if !(y > lo && y < top) {
        return Ok(false);
    }
    Ok(sampler::exit_indicator(y, lo, hi, t, SQRT_2, SUBSTEPS, true, rng))
}

/// One draw of `Z(I)` for a level-`n` interval.
pub fn z_indicator(n: u32, grid: &DyadicGrid, seed: SeedSpec) -> Result<bool> {
    z_indicator_rng(n, grid, IncrementSampler::global(), &mut seed.rng())
}

/// `p_n` by quadrature over the endpoint window.
pub fn analytic_pn(n: u32, grid: &DyadicGrid) -> Result<f64> {
    check_level(n)?;
    let t = grid.t_n(n);
    let (lo, top, hi) = windows(n);
    let upper = top.min(hi);
    let f = |y: f64| {
        let s = analytic::exit_survival(t, y, lo, hi, SQRT_2).unwrap_or(0.0);
        if s == 0.0 {
            0.0
        } else {
            analytic::pdf(t, 0.0, y) * s
        }
    };
    let mid = lo + (upper - lo) * 0.1;
    let r = quad::integrate_breaks(f, &[lo, mid, upper], 1e-16, 1e-11);
    Ok(r.value.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnEstimate {
    pub n: u32,
    pub reps: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub ratio: f64,
}

impl PnEstimate {
    fn from_hits(n: u32, reps: u64, hits: u64) -> Self {
        let p_hat = hits as f64 / reps as f64;
        Self {
            n,
            reps,
            p_hat,
            stderr: stats::binomial_stderr(p_hat, reps),
            ratio: p_hat * (n as f64 / 2.0).exp2(),
        }
    }
}

/// `(batch index, size)` covering `total` draws.
fn batches(total: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(BATCH)).map(|b| (b, BATCH.min(total - b * BATCH))).collect()
}

pub fn estimate_pn(n: u32, reps: u64, grid: &DyadicGrid, seed: SeedSpec) -> Result<PnEstimate> {
    check_level(n)?;
    if reps == 0 {
        return domain("reps must be at least 1");
    }
    let sampler = IncrementSampler::global();
    let base = seed.child(n as u64);
    let hits = batches(reps)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = base.child(b).rng();
            let mut h = 0u64;
            for _ in 0..len {
                h += z_indicator_rng(n, grid, sampler, &mut rng)? as u64;
            }
            Ok(h)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(PnEstimate::from_hits(n, reps, hits))
}

/// `Z` on `count` consecutive level-`n` intervals, coupled the way the net
/// couples them: the pair for interval `j+1` restarts on `l` at the time the
/// phase-two run of interval `j` begins, so both gaps share the `l` noise.
///
/// While the phase-two gap is being tracked, the fresh gap takes exact
/// sticky increments below `4√dt` and correlated Gaussian steps above it,
/// and merges into the tracked gap if it catches up (coalescing right
/// paths). Everything else uses exact increments.
pub fn simulate_z_chain<R: Rng + ?Sized>(
    n: u32,
    count: usize,
    grid: &DyadicGrid,
    sampler: &IncrementSampler,
    rng: &mut R,
) -> Result<Vec<bool>> {
    check_level(n)?;
    let t = grid.t_n(n);
    let (lo, top, hi) = windows(n);
    let dt = t / SUBSTEPS as f64;
    let sd = dt.sqrt();
    let band = 4.0 * sd;
    let half = (0.5 * dt).sqrt();
    let mut z = Vec::with_capacity(count);
    let mut d = sampler.draw(0.0, t, rng)?;
    for _ in 0..count {
        if !(d > lo && d < top) {
            z.push(false);
            d = sampler.draw(0.0, t, rng)?;
            continue;
        }
        let mut cur = d;
        let mut alive = true;
        let mut next = 0.0;
        let mut merged = false;
        let mut step = 0;
        while step < SUBSTEPS && alive {
            let xl = normal(rng);
            let c1 = cur + SQRT_2 * dt + half * (normal(rng) - xl);
            let mut out = c1 <= lo || c1 >= hi;
            if !out {
                let p_lo = bridge_cross(-cur, -c1, -lo, dt);
                let p_hi = bridge_cross(cur, c1, hi, dt);
                out = rng.random::<f64>() < 1.0 - (1.0 - p_lo) * (1.0 - p_hi);
            }
            next = if merged {
                c1
            } else if next < band {
                sampler.draw(next, dt, rng)?
            } else {
                next + SQRT_2 * dt + half * (normal(rng) - xl)
            };
            if !merged && next >= c1 {
                next = c1;
                merged = true;
            }
            next = next.max(0.0);
            cur = c1;
            alive = !out;
            step += 1;
        }
        z.push(alive);
        if step < SUBSTEPS {
            next = sampler::exact_increment(next, (SUBSTEPS - step) as f64 * dt, rng);
        }
        d = next;
    }
    Ok(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub m: u32,
    pub n: u32,
    pub reps: u64,
    pub intervals: u64,
    pub mean: f64,
    pub variance: f64,
    pub ucl99: f64,
    pub p_hat: f64,
    pub p_stderr: f64,
    pub bound: f64,
    pub within_bound: bool,
    pub adjacent_corr: f64,
    pub nonadjacent_corr: f64,
    pub corr_tolerance: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
    hits: f64,
    // (Z_0, Z_1) and (Z_0, Z_2) product sums and singles
    z0: f64,
    z1: f64,
    z2: f64,
    z01: f64,
    z02: f64,
}

impl Moments {
    fn add(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s3 += o.s3;
        self.s4 += o.s4;
        self.hits += o.hits;
        self.z0 += o.z0;
        self.z1 += o.z1;
        self.z2 += o.z2;
        self.z01 += o.z01;
        self.z02 += o.z02;
        self
    }
}

fn bernoulli_corr(n: f64, a: f64, b: f64, ab: f64) -> f64 {
    let (pa, pb) = (a / n, b / n);
    let den = (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt();
    if den > 0.0 {
        (ab / n - pa * pb) / den
    } else {
        0.0
    }
}

/// Sample variance of `M_n(I)` for a level-`m` interval against
/// `p_n 2^{n-m+1}`, with a 99% upper confidence limit on the variance and
/// `p_n` taken as `p̂_n + 3·stderr`.
pub fn variance_check(m: u32, n: u32, reps: u64, grid: &DyadicGrid, seed: SeedSpec) -> Result<VarianceReport> {
    check_level(n)?;
    if m >= n {
        return domain(format!("need m < n, got m={m}, n={n}"));
    }
    if reps < 4 {
        return domain("variance check needs at least 4 reps");
    }
    let count = 1usize << (n - m);
    let sampler = IncrementSampler::global();
    let base = seed.child(((m as u64) << 32) | n as u64);
    let mo = batches(reps)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = base.child(b).rng();
            let mut acc = Moments::default();
            for _ in 0..len {
                let z = simulate_z_chain(n, count, grid, sampler, &mut rng)?;
                let k = z.iter().filter(|v| **v).count() as f64;
                acc.n += 1.0;
                acc.s1 += k;
                acc.s2 += k * k;
                acc.s3 += k * k * k;
                acc.s4 += k * k * k * k;
                acc.hits += k;
                let (a, b1) = (z[0] as u8 as f64, z[1] as u8 as f64);
                let c = z.get(2).map_or(0.0, |v| *v as u8 as f64);
                acc.z0 += a;
                acc.z1 += b1;
                acc.z2 += c;
                acc.z01 += a * b1;
                acc.z02 += a * c;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<Moments>>>()?
        .into_iter()
        .fold(Moments::default(), Moments::add);
    let r = mo.n;
    let mean = mo.s1 / r;
    let variance = (mo.s2 - r * mean * mean) / (r - 1.0);
    // fourth central moment from raw sums
    let (e2, e3, e4) = (mo.s2 / r, mo.s3 / r, mo.s4 / r);
    let mu4 = e4 - 4.0 * mean * e3 + 6.0 * mean * mean * e2 - 3.0 * mean.powi(4);
    let var_s2 = ((mu4 - variance * variance * (r - 3.0) / (r - 1.0)) / r).max(0.0);
    let ucl99 = variance + Z99 * var_s2.sqrt();
    let total = reps * count as u64;
    let p_hat = mo.hits / total as f64;
    let p_stderr = stats::binomial_stderr(p_hat, total);
    let bound = (p_hat + 3.0 * p_stderr) * ((n - m + 1) as f64).exp2();
    Ok(VarianceReport {
        m,
        n,
        reps,
        intervals: count as u64,
        mean,
        variance,
        ucl99,
        p_hat,
        p_stderr,
        bound,
        within_bound: ucl99 <= bound,
        adjacent_corr: bernoulli_corr(r, mo.z0, mo.z1, mo.z01),
        nonadjacent_corr: if count > 2 { bernoulli_corr(r, mo.z0, mo.z2, mo.z02) } else { 0.0 },
        corr_tolerance: 3.0 / r.sqrt(),
    })
}

/// Deepest level [`dyadic_separation`] will return.
pub const MAX_SEPARATION_LEVEL: u32 = 62;

/// A dyadic point `t_M^j = j 2^-M` of `[0, 1]` with `x1` in
/// `[t^{j-1}, t^j]`, `x2` in `[t^j, t^{j+1}]` and `2^-M < 2 eps`; `M` is the
/// smallest level that works, so `j` is unique.
pub fn dyadic_separation(x1: f64, x2: f64, eps: f64) -> Result<(u32, u64)> {
    if !(0.0 <= x1 && x1 < x2 && x2 <= 1.0) {
        return domain(format!("need 0 <= x1 < x2 <= 1, got {x1}, {x2}"));
    }
    if !(eps > 0.0 && x2 - x1 < eps) {
        return domain(format!("need 0 < x2 - x1 < eps, got gap {} and eps {eps}", x2 - x1));
    }
    // coarsest level fine enough for eps
    let mut m0 = 0;
    while (-(m0 as f64)).exp2() >= 2.0 * eps {
        m0 += 1;
    }
    // first level with a grid point in [x1, x2] (where the binary
    // expansions first differ)
    let mut first = None;
    for m in 0..=MAX_SEPARATION_LEVEL {
        let s = (m as f64).exp2();
        let j = (x1 * s).ceil();
        if j / s <= x2 {
            first = Some(m);
            break;
        }
    }
    let Some(mf) = first else {
        return domain("points are closer than the deepest supported level");
    };
    let m = mf.max(m0);
    if m > MAX_SEPARATION_LEVEL {
        return domain("eps is finer than the deepest supported level");
    }
    let s = (m as f64).exp2();
    let j = (x1 * s).ceil();
    Ok((m, j as u64))
}

/// Per-level flags `Z(I)` over one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagTable {
    pub grid: DyadicGrid,
    levels: Vec<Option<Vec<bool>>>,
}

impl FlagTable {
    pub fn new(grid: DyadicGrid) -> Self {
        Self { grid, levels: Vec::new() }
    }

    pub fn set_level(&mut self, k: u32, flags: Vec<bool>) -> Result<()> {
        if k > 30 || flags.len() != 1usize << k {
            return domain(format!("level {k} needs {} flags, got {}", 1u64 << k.min(63), flags.len()));
        }
        let k = k as usize;
        if self.levels.len() <= k {
            self.levels.resize(k + 1, None);
        }
        self.levels[k] = Some(flags);
        Ok(())
    }

    pub fn level(&self, k: u32) -> Option<&[bool]> {
        self.levels.get(k as usize).and_then(|l| l.as_deref())
    }

    pub fn populated(&self) -> Vec<u32> {
        (0..self.levels.len() as u32).filter(|k| self.level(*k).is_some()).collect()
    }

    pub fn count(&self, k: u32) -> usize {
        self.level(k).map_or(0, |l| l.iter().filter(|f| **f).count())
    }

    /// `M_n(I)` for the `i`-th level-`m` interval.
    pub fn m_count(&self, n: u32, m: u32, i: usize) -> Result<usize> {
        if m > n {
            return domain(format!("need m <= n, got m={m}, n={n}"));
        }
        let Some(l) = self.level(n) else {
            return domain(format!("level {n} not populated"));
        };
        let w = 1usize << (n - m);
        if (i + 1) * w > l.len() {
            return domain(format!("interval {i} out of range at level {m}"));
        }
        Ok(l[i * w..(i + 1) * w].iter().filter(|f| **f).count())
    }

    /// `A(k)` as a set of cells at level `fine >= k`.
    pub fn a_set(&self, k: u32, fine: u32) -> Vec<bool> {
        let mut out = vec![false; 1usize << fine];
        if let Some(l) = self.level(k) {
            let w = 1usize << (fine - k);
            for (j, f) in l.iter().enumerate() {
                if *f {
                    out[j * w..(j + 1) * w].fill(true);
                }
            }
        }
        out
    }

    fn finest(&self) -> u32 {
        self.populated().last().copied().unwrap_or(0)
    }

    /// `∩_n ∪_{k>=n} A(k)` over the populated levels, as written.
    pub fn limsup_direct(&self) -> Vec<bool> {
        let fine = self.finest();
        let levels = self.populated();
        let mut out = vec![true; 1usize << fine];
        for &n in &levels {
            let mut u = vec![false; out.len()];
            for &k in levels.iter().filter(|k| **k >= n) {
                for (x, a) in u.iter_mut().zip(self.a_set(k, fine)) {
                    *x |= a;
                }
            }
            for (x, y) in out.iter_mut().zip(u) {
                *x &= y;
            }
        }
        out
    }

    /// Same set, from the tail unions built finest level first.
    pub fn limsup_incremental(&self) -> Vec<bool> {
        let fine = self.finest();
        let mut tail = vec![false; 1usize << fine];
        let mut out = vec![true; tail.len()];
        for &k in self.populated().iter().rev() {
            for (x, a) in tail.iter_mut().zip(self.a_set(k, fine)) {
                *x |= a;
            }
            for (x, t) in out.iter_mut().zip(&tail) {
                *x &= *t;
            }
        }
        out
    }
}

/// `Z` flags at levels `k_min..=k_max`, one coupled chain per level.
pub fn z_family_flags(grid: &DyadicGrid, k_min: u32, k_max: u32, seed: SeedSpec) -> Result<FlagTable> {
    if k_min < 2 || k_max < k_min || k_max > 24 {
        return domain(format!("need 2 <= k_min <= k_max <= 24, got {k_min}..{k_max}"));
    }
    let sampler = IncrementSampler::global();
    let mut table = FlagTable::new(*grid);
    for k in k_min..=k_max {
        let flags = simulate_z_chain(k, 1usize << k, grid, sampler, &mut seed.child(k as u64).rng())?;
        table.set_level(k, flags)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub levels: Vec<u32>,
    pub counts: Vec<f64>,
    pub slope: f64,
    pub weighted_slope: f64,
    pub weighted_stderr: f64,
}

/// Slope fit of `log2 N_k` on `k`. `counts` may be averages over `grids`
/// independent grids; the weights are inverse binomial variances of the
/// log count.
pub fn box_count_from_counts(levels: &[u32], counts: &[f64], grids: usize) -> Result<BoxCount> {
    let mut ks = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut kept_levels = Vec::new();
    let mut kept = Vec::new();
    for (&k, &c) in levels.iter().zip(counts) {
        if !(c > 0.0) {
            log::warn!("level {k} has no flagged intervals; skipped");
            continue;
        }
        let cells = (k as f64).exp2();
        let p = (c / cells).min(1.0);
        let q = (1.0 - p).max(1.0 / cells);
        ks.push(k as f64);
        ys.push(c.log2());
        ws.push(grids.max(1) as f64 * c / q);
        kept_levels.push(k);
        kept.push(c);
    }
    if ks.len() < 2 {
        return Err(Error::Estimation(format!(
            "need at least two levels with flags, got {}",
            ks.len()
        )));
    }
    let (weighted_slope, weighted_stderr) = stats::weighted_slope(&ks, &ys, &ws);
    Ok(BoxCount {
        levels: kept_levels,
        counts: kept,
        slope: stats::slope(&ks, &ys),
        weighted_slope,
        weighted_stderr,
    })
}

pub fn box_count_dimension(flags: &FlagTable, k_min: u32, k_max: u32) -> Result<BoxCount> {
    if !(k_max > k_min && k_min >= 1) {
        return domain(format!("need 1 <= k_min < k_max, got {k_min}, {k_max}"));
    }
    let levels: Vec<u32> = (k_min..=k_max).collect();
    let counts: Vec<f64> = levels.iter().map(|k| flags.count(*k) as f64).collect();
    box_count_from_counts(&levels, &counts, 1)
}

/// Box counts of the `Z` family averaged over `grids` independent grids.
pub fn averaged_box_count(grid: &DyadicGrid, k_min: u32, k_max: u32, grids: usize, seed: SeedSpec) -> Result<BoxCount> {
    if grids == 0 {
        return domain("need at least one grid");
    }
    let tables = (0..grids as u64)
        .into_par_iter()
        .map(|g| z_family_flags(grid, k_min, k_max, seed.child(g)))
        .collect::<Result<Vec<_>>>()?;
    let levels: Vec<u32> = (k_min..=k_max).collect();
    let counts: Vec<f64> = levels
        .iter()
        .map(|k| tables.iter().map(|t| t.count(*k) as f64).sum::<f64>() / grids as f64)
        .collect();
    box_count_from_counts(&levels, &counts, grids)
}

/// Monte Carlo `E[Σ |I|^γ]` over level-`k` intervals flagged by the
/// restart rule (`D` from 0 is positive after one interval).
pub fn covering_moment(k: u32, gamma: f64, reps: u64, grid: &DyadicGrid, seed: SeedSpec) -> Result<f64> {
    if reps == 0 || k > 24 {
        return domain("need reps >= 1 and k <= 24");
    }
    let t = grid.t_n(k);
    let cells = 1u64 << k;
    let sampler = IncrementSampler::global();
    let base = seed.child(k as u64);
    let total = reps * cells;
    let hits: u64 = batches(total)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = base.child(b).rng();
            let mut h = 0;
            for _ in 0..len {
                h += (sampler.draw(0.0, t, &mut rng)? > 0.0) as u64;
            }
            Ok(h)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(hits as f64 / reps as f64 * t.powf(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let g = DyadicGrid::new(0.5, 1.5).unwrap();
        assert_eq!(g.t(3, 0), 0.5);
        assert_eq!(g.t(3, 8), 1.5);
        assert_eq!(g.t(4, 6), g.t(3, 3));
        assert_eq!(g.t_n(2), 0.25);
        assert!(DyadicGrid::new(1.0, 1.0).is_err());
    }

    #[test]
    fn level_below_two_is_rejected() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        assert!(z_indicator(1, &g, SeedSpec::new(0, 0)).is_err());
        assert!(analytic_pn(1, &g).is_err());
    }

    #[test]
    fn pn_small_level_is_a_probability() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        let p = analytic_pn(2, &g).unwrap();
        assert!(p > 0.0 && p < 1.0, "{p}");
    }

    #[test]
    fn pn_matches_reference_quadrature() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        for (n, want) in [(6, 5.07588e-3), (8, 2.51202e-2), (12, 1.43922e-2), (20, 9.12044e-4)] {
            let p = analytic_pn(n, &g).unwrap();
            assert!((p / want - 1.0).abs() < 1e-4, "n={n}: {p} vs {want}");
        }
    }

    #[test]
    fn single_rep_is_zero_or_one() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        let e = estimate_pn(5, 1, &g, SeedSpec::new(1, 0)).unwrap();
        assert!(e.p_hat == 0.0 || e.p_hat == 1.0);
    }

    #[test]
    fn separation_example() {
        let (m, j) = dyadic_separation(0.24, 0.26, 0.05).unwrap();
        let p = j as f64 * (-(m as f64)).exp2();
        assert_eq!(p, 0.25);
        assert!((-(m as f64)).exp2() < 0.1);
    }

    #[test]
    fn separation_around_dyadic_point() {
        let p = 5.0 / 16.0;
        let (m, j) = dyadic_separation(p - 1e-9, p + 1e-9, 1e-3).unwrap();
        assert!(m >= 4);
        assert_eq!(j as f64 * (-(m as f64)).exp2(), p);
        let (m, j) = dyadic_separation(p, p + 1e-4, 1e-3).unwrap();
        assert_eq!(j as f64 * (-(m as f64)).exp2(), p);
        assert!(dyadic_separation(0.3, 0.2, 0.5).is_err());
        assert!(dyadic_separation(0.2, 0.3, 0.05).is_err());
    }

    #[test]
    fn limsup_two_ways() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        let mut t = FlagTable::new(g);
        t.set_level(1, vec![true, false]).unwrap();
        t.set_level(2, vec![false, true, false, true]).unwrap();
        t.set_level(3, vec![false, false, true, true, false, false, false, true]).unwrap();
        assert_eq!(t.limsup_direct(), t.limsup_incremental());
        assert_eq!(t.m_count(3, 1, 0).unwrap(), 2);
        assert_eq!(t.m_count(3, 0, 0).unwrap(), 3);
        assert!(t.set_level(2, vec![true]).is_err());
    }

    #[test]
    fn box_count_trivial_cases() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        let mut full = FlagTable::new(g);
        let mut single = FlagTable::new(g);
        for k in 1..=8 {
            full.set_level(k, vec![true; 1 << k]).unwrap();
            let mut one = vec![false; 1 << k];
            one[1] = true;
            single.set_level(k, one).unwrap();
        }
        let f = box_count_dimension(&full, 1, 8).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.weighted_slope - 1.0).abs() < 1e-12);
        let s = box_count_dimension(&single, 1, 8).unwrap();
        assert!(s.slope.abs() < 1e-12 && s.weighted_slope.abs() < 1e-12);
        let empty = FlagTable::new(g);
        assert!(matches!(box_count_dimension(&empty, 1, 8), Err(Error::Estimation(_))));
    }

    #[test]
    fn chain_is_deterministic() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        let s = IncrementSampler::global();
        let a = simulate_z_chain(6, 64, &g, s, &mut SeedSpec::new(3, 1).rng()).unwrap();
        let b = simulate_z_chain(6, 64, &g, s, &mut SeedSpec::new(3, 1).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variance_check_next_level() {
        let g = DyadicGrid::new(0.0, 1.0).unwrap();
        let r = variance_check(4, 5, 2000, &g, SeedSpec::new(4, 0)).unwrap();
        assert_eq!(r.intervals, 2);
        assert!(r.mean <= 2.0 && r.variance <= 1.0);
    }
}
