//! Branching-coalescing random walks on the space-time lattice: the
//! discrete surrogate for the left-right web and the net.
//!
//! Space step `eps`, time step `eps²`. Each site `(i, m)` with `i + m` even
//! carries one arrow; `Both` has probability `branch_coeff·eps`. Positions
//! are in lattice units and the strip `[-W, W]` reflects at its edges.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fractal::DyadicGrid;
use crate::seed::SeedSpec;

pub const MEMORY_BUDGET: u64 = 1 << 30;
/// Gap (lattice units) at or below which two occupied sites count as a
/// cluster candidate.
pub const CLUSTER_GAP: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub eps: f64,
    pub horizon: f64,
    pub width: f64,
    pub branch_coeff: f64,
}

impl NetConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / (self.eps * self.eps)).round() as usize
    }

    pub fn half_width(&self) -> i64 {
        (self.width / (2.0 * self.eps)).ceil() as i64
    }

    pub fn branch_prob(&self) -> f64 {
        self.branch_coeff * self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Arrow {
    LeftOnly = 0,
    RightOnly = 1,
    Both = 2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrowField {
    half_width: i64,
    steps: usize,
    // row-major, 2W+1 entries per row; entries with i+m odd are unused
    arrows: Vec<Arrow>,
}

impl ArrowField {
    /// Field from an explicit rule, for tests and small experiments.
    pub fn from_fn<F: FnMut(i64, usize) -> Arrow>(half_width: i64, steps: usize, mut f: F) -> Self {
        let w = (2 * half_width + 1) as usize;
        let mut arrows = vec![Arrow::LeftOnly; w * (steps + 1)];
        for m in 0..=steps {
            for i in -half_width..=half_width {
                if (i + m as i64).rem_euclid(2) == 0 {
                    arrows[m * w + (i + half_width) as usize] = f(i, m);
                }
            }
        }
        Self { half_width, steps, arrows }
    }

    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn arrow(&self, i: i64, m: usize) -> Arrow {
        let w = (2 * self.half_width + 1) as usize;
        self.arrows[m * w + (i + self.half_width) as usize]
    }

    fn left_of(&self, i: i64) -> i64 {
        if i - 1 < -self.half_width {
            i + 1
        } else {
            i - 1
        }
    }

    fn right_of(&self, i: i64) -> i64 {
        if i + 1 > self.half_width {
            i - 1
        } else {
            i + 1
        }
    }

    /// Sites reached from `(i, m)` in one step.
    pub fn successors(&self, i: i64, m: usize) -> (Option<i64>, Option<i64>) {
        match self.arrow(i, m) {
            Arrow::LeftOnly => (Some(self.left_of(i)), None),
            Arrow::RightOnly => (None, Some(self.right_of(i))),
            Arrow::Both => (Some(self.left_of(i)), Some(self.right_of(i))),
        }
    }

    pub fn count(&self, a: Arrow) -> usize {
        let w = (2 * self.half_width + 1) as usize;
        let mut n = 0;
        for m in 0..=self.steps {
            for i in -self.half_width..=self.half_width {
                if (i + m as i64).rem_euclid(2) == 0 && self.arrows[m * w + (i + self.half_width) as usize] == a {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Arrow field for `config`, one ChaCha stream per time row.
pub fn generate_arrows(config: &NetConfig, seed: SeedSpec) -> Result<ArrowField> {
    let p = config.branch_prob();
    if !(config.eps > 0.0 && config.eps < 1.0) {
        return domain(format!("eps must lie in (0,1), got {}", config.eps));
    }
    if !(p >= 0.0 && p < 1.0) {
        return domain(format!("branch probability must lie in [0,1), got {p}"));
    }
    if !(config.horizon > 0.0) || !(config.width > 0.0) {
        return domain("horizon and width must be positive");
    }
    let steps = config.steps();
    let w = config.half_width();
    let needed = (steps as u64 + 1).saturating_mul(2 * w as u64 + 1);
    if needed > MEMORY_BUDGET {
        return Err(Error::Capacity { needed, budget: MEMORY_BUDGET });
    }
    let width = (2 * w + 1) as usize;
    let mut arrows = vec![Arrow::LeftOnly; width * (steps + 1)];
    let side = (1.0 - p) / 2.0;
    for (m, row) in arrows.chunks_mut(width).enumerate() {
        let mut rng = seed.child(m as u64).rng();
        let first = if (-w + m as i64).rem_euclid(2) == 0 { 0 } else { 1 };
        for k in (first..width).step_by(2) {
            let u: f64 = rng.random();
            row[k] = if u < p {
                Arrow::Both
            } else if u < p + side {
                Arrow::LeftOnly
            } else {
                Arrow::RightOnly
            };
        }
    }
    Ok(ArrowField { half_width: w, steps, arrows })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSet {
    pub step: usize,
    pub positions: Vec<i64>,
}

impl PointSet {
    pub fn time(&self, eps: f64) -> f64 {
        self.step as f64 * eps * eps
    }
}

/// Occupation rows of the net started from `start` at step `from`.
#[derive(Debug, Clone)]
pub struct Reach {
    half_width: i64,
    occupied: Vec<bool>,
    pub step: usize,
    pub hit_boundary: bool,
}

impl Reach {
    pub fn new(field: &ArrowField, start: &[i64], from: usize) -> Self {
        let w = field.half_width;
        let mut occupied = vec![false; (2 * w + 1) as usize];
        for &i in start {
            if (-w..=w).contains(&i) && (i + from as i64).rem_euclid(2) == 0 {
                occupied[(i + w) as usize] = true;
            }
        }
        let mut r = Self { half_width: w, occupied, step: from, hit_boundary: false };
        r.hit_boundary = r.touches_edge();
        r
    }

    fn touches_edge(&self) -> bool {
        self.occupied[0] || self.occupied[1] || self.occupied[self.occupied.len() - 1] || self.occupied[self.occupied.len() - 2]
    }

    pub fn advance(&mut self, field: &ArrowField) {
        let w = self.half_width;
        let mut next = vec![false; self.occupied.len()];
        for (k, &on) in self.occupied.iter().enumerate() {
            if !on {
                continue;
            }
            let (l, r) = field.successors(k as i64 - w, self.step);
            if let Some(l) = l {
                next[(l + w) as usize] = true;
            }
            if let Some(r) = r {
                next[(r + w) as usize] = true;
            }
        }
        self.occupied = next;
        self.step += 1;
        self.hit_boundary |= self.touches_edge();
    }

    pub fn point_set(&self) -> PointSet {
        let w = self.half_width;
        let positions = self
            .occupied
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(k, _)| k as i64 - w)
            .collect();
        PointSet { step: self.step, positions }
    }
}

/// Positions at step `m` of all net paths from `start × {0}`.
pub fn reachable_set(field: &ArrowField, start: &[i64], m: usize) -> Result<PointSet> {
    if start.is_empty() {
        return domain("start set is empty");
    }
    let w = field.half_width;
    if start.iter().any(|i| !(-w..=w).contains(i)) {
        return domain("start set leaves the lattice strip");
    }
    if m > field.steps + 1 {
        return domain(format!("step {m} beyond the field's {} rows", field.steps));
    }
    let mut r = Reach::new(field, start, 0);
    for _ in 0..m {
        r.advance(field);
    }
    Ok(r.point_set())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTrace {
    pub start_step: usize,
    pub positions: Vec<i64>,
}

impl PathTrace {
    pub fn at(&self, step: usize) -> Option<i64> {
        step.checked_sub(self.start_step).and_then(|k| self.positions.get(k).copied())
    }

    pub fn end_step(&self) -> usize {
        self.start_step + self.positions.len() - 1
    }
}

fn follow(field: &ArrowField, z: i64, from: usize, to: usize, leftmost: bool) -> PathTrace {
    let mut positions = vec![z];
    let mut i = z;
    for m in from..to.min(field.steps + 1) {
        let (l, r) = field.successors(i, m);
        i = if leftmost { l.or(r) } else { r.or(l) }.expect("every site has an arrow");
        positions.push(i);
    }
    PathTrace { start_step: from, positions }
}

/// Leftmost path from `(z, from)` up to step `to`.
pub fn leftmost_path(field: &ArrowField, z: i64, from: usize, to: usize) -> PathTrace {
    follow(field, z, from, to, true)
}

pub fn rightmost_path(field: &ArrowField, z: i64, from: usize, to: usize) -> PathTrace {
    follow(field, z, from, to, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagKind {
    J1,
    J2,
    J3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialTimeFlags {
    pub grid: DyadicGrid,
    pub level: u32,
    pub flagged: Vec<bool>,
    pub kind: FlagKind,
}

impl SpecialTimeFlags {
    pub fn count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }
}

/// Lattice steps of the level-`k` grid: `(step of a, steps per interval)`.
pub fn align(grid: &DyadicGrid, k: u32, eps: f64) -> Result<(usize, usize)> {
    let dt = eps * eps;
    let per = grid.t_n(k) / dt;
    let start = grid.a / dt;
    let (rp, rs) = (per.round(), start.round());
    if rp < 1.0 || (per - rp).abs() > 1e-9 * per.max(1.0) || (start - rs).abs() > 1e-9 * start.max(1.0) {
        return Err(Error::Alignment(format!(
            "level {k}: interval/eps² = {per}, a/eps² = {start}; both must be integers"
        )));
    }
    Ok((rs as usize, rp as usize))
}

fn restart_flags<F>(field: &ArrowField, grid: &DyadicGrid, k: u32, eps: f64, kind: FlagKind, mut flag: F) -> Result<SpecialTimeFlags>
where
    F: FnMut(usize, usize) -> Option<bool>,
{
    let (a0, per) = align(grid, k, eps)?;
    if a0 < per {
        return Err(Error::Alignment(format!("level {k}: restart time t^(-1) falls before 0")));
    }
    let n = 1usize << k;
    if a0 + n * per > field.steps + 1 {
        return domain("grid extends past the simulated horizon");
    }
    let mut flagged = vec![false; n];
    for (j, f) in flagged.iter_mut().enumerate() {
        let restart = a0 + j * per - per;
        let check = restart + per;
        *f = flag(restart, check).unwrap_or(false);
    }
    Ok(SpecialTimeFlags { grid: *grid, level: k, flagged, kind })
}

/// Level-`k` intervals `[t^j, t^{j+1}]` where the rightmost path restarted
/// on `l` at `t^{j-1}` is strictly right of `l` at `t^j`.
pub fn covering_flags_j1(field: &ArrowField, l: &PathTrace, grid: &DyadicGrid, k: u32, eps: f64) -> Result<SpecialTimeFlags> {
    restart_flags(field, grid, k, eps, FlagKind::J1, |s, e| {
        let z = l.at(s)?;
        let r = rightmost_path(field, z, s, e);
        Some(r.at(e)? > l.at(e)?)
    })
}

/// Same as J1 but both the leftmost and the rightmost paths are restarted
/// on the net path `pi`.
pub fn covering_flags_j3(field: &ArrowField, pi: &PathTrace, grid: &DyadicGrid, k: u32, eps: f64) -> Result<SpecialTimeFlags> {
    restart_flags(field, grid, k, eps, FlagKind::J3, |s, e| {
        let z = pi.at(s)?;
        let l = leftmost_path(field, z, s, e);
        let r = rightmost_path(field, z, s, e);
        Some(l.at(e)? < r.at(e)?)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub min_gap: i64,
    pub histogram: BTreeMap<i64, usize>,
}

impl GapStats {
    pub fn cluster_candidate(&self) -> bool {
        self.min_gap <= CLUSTER_GAP
    }
}

pub fn gap_statistics(ps: &PointSet) -> Result<GapStats> {
    if ps.positions.len() < 2 {
        return Err(Error::UndefinedGap(ps.positions.len()));
    }
    let mut histogram = BTreeMap::new();
    let mut min_gap = i64::MAX;
    for w in ps.positions.windows(2) {
        let g = w[1] - w[0];
        min_gap = min_gap.min(g);
        *histogram.entry(g).or_insert(0) += 1;
    }
    Ok(GapStats { min_gap, histogram })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRow {
    pub step: usize,
    pub position_count: usize,
    pub min_gap: Option<i64>,
    pub flagged_j1: bool,
    pub flagged_j3: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    pub rows: Vec<NetRow>,
    pub j1: SpecialTimeFlags,
    pub j3: SpecialTimeFlags,
    pub hit_boundary: bool,
}

/// Full lattice run: net from every site of `[-start_half, start_half]` at
/// step 0, sampled every `stride` steps; J1 on the leftmost path from the
/// origin and J3 on the rightmost one, at level `k` of `grid`.
pub fn run_net(
    config: &NetConfig,
    seed: SeedSpec,
    start_half: i64,
    grid: &DyadicGrid,
    k: u32,
    stride: usize,
) -> Result<NetReport> {
    let field = generate_arrows(config, seed)?;
    let steps = field.steps;
    let start: Vec<i64> = (-start_half..=start_half).filter(|i| i.rem_euclid(2) == 0).collect();
    let l = leftmost_path(&field, 0, 0, steps);
    let r = rightmost_path(&field, 0, 0, steps);
    let j1 = covering_flags_j1(&field, &l, grid, k, config.eps)?;
    let j3 = covering_flags_j3(&field, &r, grid, k, config.eps)?;
    let (a0, per) = align(grid, k, config.eps)?;
    let in_flagged = |f: &SpecialTimeFlags, m: usize| {
        if m < a0 {
            return false;
        }
        let j = (m - a0) / per;
        j < f.flagged.len() && f.flagged[j]
    };
    let mut reach = Reach::new(&field, &start, 0);
    let mut rows = Vec::new();
    for m in 0..=steps {
        if m % stride.max(1) == 0 {
            let ps = reach.point_set();
            rows.push(NetRow {
                step: m,
                position_count: ps.positions.len(),
                min_gap: gap_statistics(&ps).ok().map(|g| g.min_gap),
                flagged_j1: in_flagged(&j1, m),
                flagged_j3: in_flagged(&j3, m),
            });
        }
        if m < steps {
            reach.advance(&field);
        }
    }
    if reach.hit_boundary {
        log::warn!("net reached the reflecting edge of the strip; widen `width`");
    }
    Ok(NetReport { rows, j1, j3, hit_boundary: reach.hit_boundary })
}
