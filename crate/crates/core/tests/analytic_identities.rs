use stickynet::analytic::{self, MixedLaw};
use stickynet::quad;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// `∫₀^∞ f(z) dz` with breaks around the bulk of `pdf(s, 0, ·)`.
fn over_space<F: Fn(f64) -> f64>(s: f64, f: F) -> f64 {
    let st = s.sqrt();
    let pts = [0.0, st, 3.0 * st, 6.0 * st, 1.0, 3.0, 30.0];
    let mut p = pts.to_vec();
    p.sort_by(f64::total_cmp);
    p.dedup();
    quad::integrate_breaks(f, &p, 1e-14, 1e-12).value
}

#[test]
fn semigroup_atom() {
    for (s, t) in [(0.01, 0.02), (0.1, 0.3), (0.5, 1.0)] {
        let direct = analytic::atom(s + t, 0.0);
        let split = analytic::atom(s, 0.0) * analytic::atom(t, 0.0)
            + over_space(s, |z| analytic::pdf(s, 0.0, z) * analytic::atom(t, z));
        assert!(close(direct, split, 1e-9), "s={s} t={t}: {direct} vs {split}");
    }
}

#[test]
fn semigroup_density() {
    for (s, t, y) in [(0.05, 0.05, 0.2), (0.2, 0.3, 0.7), (0.5, 0.5, 2.0)] {
        let direct = analytic::pdf(s + t, 0.0, y);
        let split = analytic::atom(s, 0.0) * analytic::pdf(t, 0.0, y)
            + over_space(s, |z| analytic::pdf(s, 0.0, z) * analytic::pdf(t, z, y));
        assert!(close(direct, split, 1e-8), "s={s} t={t} y={y}: {direct} vs {split}");
    }
}

#[test]
fn first_passage_convolution() {
    for (t, x, y) in [(0.3, 0.2, 0.5), (1.0, 0.5, 0.1), (0.1, 0.05, 0.3)] {
        let f = |s: f64| analytic::hitting_density(s, x).unwrap();
        let atom = quad::integrate(|s| f(s) * analytic::atom(t - s, 0.0), 0.0, t, 1e-14, 1e-11).value;
        assert!(close(atom, analytic::atom(t, x), 1e-9), "atom t={t} x={x}");
        let cont = analytic::killed_kernel(t, x, y).unwrap()
            + quad::integrate(|s| f(s) * analytic::pdf(t - s, 0.0, y), 0.0, t, 1e-14, 1e-11).value;
        assert!(close(cont, analytic::pdf(t, x, y), 1e-8), "density t={t} x={x} y={y}");
    }
}

#[test]
fn hitting_mass() {
    for x in [0.1, 0.5, 1.0] {
        let m = quad::integrate_to_inf(|s| analytic::hitting_density(s, x).unwrap(), 0.0, 1e-14, 1e-12).value;
        assert!(close(m, (-2.0 * std::f64::consts::SQRT_2 * x).exp(), 1e-10), "x={x}: {m}");
    }
}

#[test]
fn normalization_from_positive_starts() {
    for (t, x) in [(0.01, 0.3), (1.0, 2.0), (5.0, 0.0)] {
        let law = MixedLaw::new(t, x).unwrap();
        assert!(close(law.total_mass(), 1.0, 1e-9), "t={t} x={x}");
    }
}

#[test]
fn small_time_mass_law() {
    let r = analytic::continuous_mass(1e-8).unwrap() / 1e-4;
    let c = 4.0 / std::f64::consts::PI.sqrt();
    assert!((r / c - 1.0).abs() < 1e-3, "{r} vs {c}");
}
