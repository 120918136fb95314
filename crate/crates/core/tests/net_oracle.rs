use std::collections::BTreeSet;

use rand::Rng;

use stickynet::fractal::DyadicGrid;
use stickynet::net_grid::{self, Arrow, ArrowField, NetConfig};
use stickynet::SeedSpec;

/// Every path, followed one at a time.
fn enumerate(field: &ArrowField, i: i64, m: usize, target: usize, out: &mut BTreeSet<i64>) {
    if m == target {
        out.insert(i);
        return;
    }
    let (l, r) = field.successors(i, m);
    for next in [l, r].into_iter().flatten() {
        enumerate(field, next, m + 1, target, out);
    }
}

#[test]
fn reachable_set_matches_enumeration() {
    let mut rng = SeedSpec::new(31, 0).rng();
    for case in 0..100 {
        let w: i64 = rng.random_range(2..=6);
        let steps: usize = rng.random_range(1..=12);
        let p: f64 = rng.random_range(0.0..0.6);
        let field = ArrowField::from_fn(w, steps, |_, _| {
            let u: f64 = rng.random();
            if u < p {
                Arrow::Both
            } else if u < p + (1.0 - p) / 2.0 {
                Arrow::LeftOnly
            } else {
                Arrow::RightOnly
            }
        });
        let start: Vec<i64> = (-w..=w).filter(|i| i.rem_euclid(2) == 0 && rng.random::<bool>()).collect();
        if start.is_empty() {
            continue;
        }
        for m in 0..=steps {
            let mut want = BTreeSet::new();
            for &z in &start {
                enumerate(&field, z, 0, m, &mut want);
            }
            let got = net_grid::reachable_set(&field, &start, m).unwrap();
            assert_eq!(got.positions, want.into_iter().collect::<Vec<_>>(), "case {case}, step {m}");
        }
    }
}

#[test]
fn extreme_paths_bound_the_net() {
    let cfg = NetConfig { eps: 0.05, horizon: 0.5, width: 6.0, branch_coeff: 1.0 };
    let field = net_grid::generate_arrows(&cfg, SeedSpec::new(32, 0)).unwrap();
    let l = net_grid::leftmost_path(&field, 0, 0, field.steps());
    let r = net_grid::rightmost_path(&field, 0, 0, field.steps());
    for m in 0..=field.steps() {
        let ps = net_grid::reachable_set(&field, &[0], m).unwrap();
        assert_eq!(ps.positions.first().copied(), l.at(m));
        assert_eq!(ps.positions.last().copied(), r.at(m));
    }
}

#[test]
fn j_flags_follow_restarted_paths() {
    let eps = 1.0 / 16.0;
    let cfg = NetConfig { eps, horizon: 1.0, width: 8.0, branch_coeff: 1.0 };
    let field = net_grid::generate_arrows(&cfg, SeedSpec::new(33, 0)).unwrap();
    let grid = DyadicGrid::new(0.5, 1.0).unwrap();
    let l = net_grid::leftmost_path(&field, 0, 0, field.steps());
    let k = 3;
    let flags = net_grid::covering_flags_j1(&field, &l, &grid, k, eps).unwrap();
    let (a0, per) = net_grid::align(&grid, k, eps).unwrap();
    for (j, f) in flags.flagged.iter().enumerate() {
        let s = a0 + j * per - per;
        let e = s + per;
        let r = net_grid::rightmost_path(&field, l.at(s).unwrap(), s, e);
        assert_eq!(*f, r.at(e).unwrap() > l.at(e).unwrap());
    }
}

#[test]
fn branching_frequency_matches_config() {
    let cfg = NetConfig { eps: 0.02, horizon: 1.0, width: 4.0, branch_coeff: 5.0 };
    let field = net_grid::generate_arrows(&cfg, SeedSpec::new(34, 0)).unwrap();
    let both = field.count(Arrow::Both) as f64;
    let total = (field.count(Arrow::Both) + field.count(Arrow::LeftOnly) + field.count(Arrow::RightOnly)) as f64;
    let p = cfg.branch_prob();
    let se = (p * (1.0 - p) / total).sqrt();
    assert!((both / total - p).abs() < 4.0 * se, "{} vs {p}", both / total);
}

#[test]
fn run_net_is_deterministic() {
    let cfg = NetConfig { eps: 1.0 / 16.0, horizon: 1.0, width: 8.0, branch_coeff: 1.0 };
    let grid = DyadicGrid::new(0.5, 1.0).unwrap();
    let a = net_grid::run_net(&cfg, SeedSpec::new(35, 0), 20, &grid, 3, 4).unwrap();
    let b = net_grid::run_net(&cfg, SeedSpec::new(35, 0), 20, &grid, 3, 4).unwrap();
    assert_eq!(a, b);
    assert!(!a.rows.is_empty());
}
