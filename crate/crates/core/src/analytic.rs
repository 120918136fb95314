//! Closed-form laws of the sticky reflected drifted Brownian motion
//! `D = (R - L)/√2` (drift √2, stickiness √2) and of the general resolvent.
//!
//! Every term of the form `e^{big} erfc(u)` is rewritten as
//! `e^{big - u²} erfcx(u)` and the exponents are combined before a single
//! `exp`, so nothing overflows for large `y/√t`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quad;
use crate::special::{erf, erfc, erfcx, exp_norm_cdf, norm_cdf, FRAC_1_SQRT_PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickyParams {
    pub mu: f64,
    pub theta: f64,
}

impl StickyParams {
    pub fn new(mu: f64, theta: f64) -> Result<Self> {
        if !(mu >= 0.0) || !(theta > 0.0) || !theta.is_finite() {
            return domain(format!("need mu >= 0 and theta > 0, got mu={mu}, theta={theta}"));
        }
        Ok(Self { mu, theta })
    }

    /// Parameters of the rescaled left-right gap: `mu = theta = √2`.
    pub fn left_right() -> Self {
        Self { mu: SQRT_2, theta: SQRT_2 }
    }
}

/// `e^{-λt}`-transform of the law of `D` started at 0:
/// `atom_coeff·δ₀ + cont_coeff·e^{-exp_rate·y} dy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventLaw {
    pub lambda: f64,
    pub params: StickyParams,
    pub atom_coeff: f64,
    pub cont_coeff: f64,
    pub exp_rate: f64,
}

impl ResolventLaw {
    pub fn density(&self, y: f64) -> f64 {
        self.cont_coeff * (-self.exp_rate * y).exp()
    }

    /// `λ` times the total mass; equals 1.
    pub fn lambda_mass(&self) -> f64 {
        self.lambda * (self.atom_coeff + self.cont_coeff / self.exp_rate)
    }
}

pub fn resolvent(lambda: f64, params: StickyParams) -> Result<ResolventLaw> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("resolvent needs lambda > 0, got {lambda}"));
    }
    let StickyParams { mu, theta } = params;
    let s = (2.0 * lambda + mu * mu).sqrt();
    let den = lambda + theta * (s + mu);
    Ok(ResolventLaw {
        lambda,
        params,
        atom_coeff: 1.0 / den,
        cont_coeff: 2.0 * theta / den,
        // √(2a) - μ without cancellation
        exp_rate: 2.0 * lambda / (s + mu),
    })
}

/// `P[D_t = 0 | D_0 = x]`, left-right parameters.
pub fn atom(t: f64, x: f64) -> f64 {
    let st = t.sqrt();
    let v = x / (2.0 * t).sqrt() + st;
    let pre = (-x * x / (2.0 * t) - SQRT_2 * x - t).exp();
    let bracket = (1.0 + SQRT_2 * x + 2.0 * t) * erfcx(v) - 2.0 * st * FRAC_1_SQRT_PI;
    (pre * bracket).clamp(0.0, 1.0)
}

/// Continuous part of the law of `D_t` given `D_0 = x`, at `y >= 0`.
/// No argument checks; `t > 0`, `x, y >= 0` assumed.
pub fn pdf(t: f64, x: f64, y: f64) -> f64 {
    let st2 = (2.0 * t).sqrt();
    let s = x + y;
    let w = s / st2 + t.sqrt();
    let e = (SQRT_2 * (y - x) - s * s / (2.0 * t) - t).exp();
    let excursion = e
        * (2.0 * SQRT_2 * (1.0 + SQRT_2 * s + 2.0 * t) * erfcx(w)
            - 4.0 * st2 * FRAC_1_SQRT_PI);
    let k = if x > 0.0 && y > 0.0 { kernel(t, x, y) } else { 0.0 };
    (k + excursion).max(0.0)
}

fn kernel(t: f64, x: f64, y: f64) -> f64 {
    let d = y - x;
    let g = (SQRT_2 * d - t - d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
    g * -(-2.0 * x * y / t).exp_m1()
}

/// Atom and continuous density at `y` for `D_0 = 0`.
pub fn density_zero(t: f64, y: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    if !(y >= 0.0) {
        return domain(format!("y must be nonnegative, got {y}"));
    }
    Ok((atom(t, 0.0), pdf(t, 0.0, y)))
}

/// Atom and continuous density at `y` for `D_0 = x`.
pub fn density_full(t: f64, x: f64, y: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    if !(x >= 0.0) || !(y >= 0.0) {
        return domain(format!("x and y must be nonnegative, got x={x}, y={y}"));
    }
    Ok((atom(t, x), pdf(t, x, y)))
}

/// Transition density of √2-drifted Brownian motion killed at 0.
pub fn killed_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) || !(x > 0.0) || !(y > 0.0) {
        return domain(format!("killed kernel needs t, x, y > 0, got t={t}, x={x}, y={y}"));
    }
    Ok(kernel(t, x, y))
}

/// Density of the hitting time of 0 for √2-drifted Brownian motion from
/// `x > 0`. Defective: total mass `e^{-2√2 x}`.
pub fn hitting_density(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !(x > 0.0) {
        return domain(format!("hitting density needs s, x > 0, got s={s}, x={x}"));
    }
    let z = x + SQRT_2 * s;
    Ok(x / (2.0 * PI * s * s * s).sqrt() * (-z * z / (2.0 * s)).exp())
}

/// Mass of the continuous part from 0, i.e. `1 - atom(t, 0)`, in a form
/// that keeps full relative accuracy as `t → 0`.
pub fn continuous_mass(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    let st = t.sqrt();
    Ok(erf(st) - 2.0 * t * erfc(st) + 2.0 * (-t).exp() * st * FRAC_1_SQRT_PI)
}

/// CDF of `μ`-drifted Brownian motion reflected at 0, from 0.
pub fn reflected_cdf(t: f64, y: f64, mu: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let st = t.sqrt();
    norm_cdf((y - mu * t) / st) - exp_norm_cdf(2.0 * mu * y, (-y - mu * t) / st)
}

/// The law of `D_t` given `D_0 = x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedLaw {
    pub t: f64,
    pub x0: f64,
    pub atom: f64,
}

impl MixedLaw {
    pub fn new(t: f64, x0: f64) -> Result<Self> {
        if !(t > 0.0) || !(x0 >= 0.0) {
            return domain(format!("need t > 0 and x0 >= 0, got t={t}, x0={x0}"));
        }
        Ok(Self { t, x0, atom: atom(t, x0) })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            0.0
        } else {
            pdf(self.t, self.x0, y)
        }
    }

    /// Upper end of the quadrature range; `tail_bound` covers the rest.
    pub fn y_max(&self) -> f64 {
        self.x0 + SQRT_2 * self.t + 20.0 + 10.0 * self.t.sqrt()
    }

    /// Bound on the continuous mass above `y_max`, from domination by the
    /// reflected drifted motion.
    pub fn tail_bound(&self) -> f64 {
        2.0 * norm_cdf((self.x0 + SQRT_2 * self.t - self.y_max()) / self.t.sqrt())
    }

    fn breaks(&self) -> Vec<f64> {
        let st = self.t.sqrt();
        let c = self.x0 + SQRT_2 * self.t;
        let mut pts = vec![0.0, self.y_max()];
        for k in [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0] {
            pts.push(c + k * st);
        }
        for k in [1.0, 3.0, 6.0] {
            pts.push(k * st);
        }
        if self.x0 > 0.0 {
            pts.push(self.x0);
        }
        pts.retain(|p| *p >= 0.0 && *p <= self.y_max());
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `∫₀^{y_max} pdf`, by adaptive quadrature.
    pub fn continuous_integral(&self, abs_tol: f64) -> quad::QuadResult {
        quad::integrate_breaks(|y| self.pdf(y), &self.breaks(), abs_tol, 0.0)
    }

    /// `atom + ∫pdf`; should be 1.
    pub fn total_mass(&self) -> f64 {
        self.atom + self.continuous_integral(1e-13).value
    }

    /// CDF of the continuous part (unnormalized) at each of the ascending
    /// points `ys`, by chained quadrature between neighbours.
    pub fn continuous_cdf_sorted(&self, ys: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(ys.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        let wide = 0.05 * self.t.sqrt();
        for &y in ys {
            let y = y.max(0.0);
            if y > prev {
                acc += if y - prev < wide {
                    quad::gk15(&|u| self.pdf(u), prev, y).0
                } else {
                    quad::integrate(|u| self.pdf(u), prev, y, 1e-14, 1e-13).value
                };
                prev = y;
            }
            out.push(acc);
        }
        out
    }
}

/// Probability that `ν`-drifted Brownian motion started at `y0` stays in
/// `(lo, hi)` up to time `t`.
pub fn exit_survival(t: f64, y0: f64, lo: f64, hi: f64, drift: f64) -> Result<f64> {
    if !(lo < hi) {
        return domain(format!("need lo < hi, got lo={lo}, hi={hi}"));
    }
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    if y0 <= lo || y0 >= hi {
        return Ok(0.0);
    }
    let w = hi - lo;
    let x = y0 - lo;
    if hi.is_infinite() {
        return Ok(one_sided_survival(t, x, drift));
    }
    let v = if w * w / t < 0.5 {
        survival_spectral(t, x, w, drift)
    } else {
        survival_images(t, x, w, drift)
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Survival above 0 from `x` with drift `nu`, no upper barrier.
fn one_sided_survival(t: f64, x: f64, nu: f64) -> f64 {
    let st = t.sqrt();
    (norm_cdf((x + nu * t) / st) - exp_norm_cdf(-2.0 * nu * x, (-x + nu * t) / st)).clamp(0.0, 1.0)
}

/// `e^{ν(c-x)} ∫₀^L φ_t(y - c) e^{ν(y-c)} e^{-ν²t/2} dy`, one image.
fn image_term(t: f64, x: f64, w: f64, nu: f64, c: f64) -> f64 {
    let st = t.sqrt();
    let a = nu * (c - x);
    let z1 = (w - c - nu * t) / st;
    let z2 = (-c - nu * t) / st;
    if z2 > 0.0 {
        exp_norm_cdf(a, -z2) - exp_norm_cdf(a, -z1)
    } else {
        exp_norm_cdf(a, z1) - exp_norm_cdf(a, z2)
    }
}

/// Girsanov-tilted method of images on `(0, w)`.
pub fn survival_images(t: f64, x: f64, w: f64, nu: f64) -> f64 {
    let pair = |k: f64| {
        let s = 2.0 * k * w;
        image_term(t, x, w, nu, x + s) - image_term(t, x, w, nu, s - x)
    };
    let mut sum = pair(0.0);
    for k in 1..10_000 {
        let up = pair(k as f64);
        let down = pair(-(k as f64));
        sum += up + down;
        if up.abs() < 1e-14 && down.abs() < 1e-14 {
            break;
        }
    }
    sum
}

/// Girsanov-tilted sine series on `(0, w)`; converges fast when `w²/t` is small.
pub fn survival_spectral(t: f64, x: f64, w: f64, nu: f64) -> f64 {
    let mut sum = 0.0;
    for n in 1..100_000 {
        let k = n as f64 * PI / w;
        let decay = k * k * t / 2.0;
        let a = (-nu * x - nu * nu * t / 2.0 - decay).exp();
        let b = (nu * (w - x) - nu * nu * t / 2.0 - decay).exp();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = 2.0 / w * (k * x).sin() * k / (nu * nu + k * k) * (a - sign * b);
        sum += term;
        if a.max(b) < 1e-17 {
            break;
        }
    }
    sum
}

/// Integrand of the limiting constant; `inner` scales the argument of the
/// `erf` factor.
pub fn limit_integrand(z: f64, inner: f64) -> f64 {
    2.0 * SQRT_2 * erfc(z / SQRT_2) * erf(z * inner)
}

/// `lim p_n / √t_n = ∫₀^∞ 2√2 erfc(z/√2) erf(z/√2) dz = 4(√2-1)/√π`,
/// by quadrature at the given absolute tolerance.
pub fn limit_constant_tol(tol: f64) -> f64 {
    let inner = 1.0 / SQRT_2;
    quad::integrate_breaks(
        |z| limit_integrand(z, inner),
        &[0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0],
        tol,
        0.0,
    )
    .value
}

pub fn limit_constant() -> f64 {
    limit_constant_tol(1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn atom_at_small_time() {
        let (a, p0) = density_zero(0.01, 0.0).unwrap();
        assert!(close(a, 0.7935726649824557, 1e-14), "{a}");
        assert!(close(p0, 2.2445624510934988, 1e-13), "{p0}");
        assert!(close(2.0 * SQRT_2 * a, p0, 1e-12));
    }

    #[test]
    fn argument_errors() {
        assert!(density_zero(0.0, 1.0).is_err());
        assert!(density_zero(1.0, -1.0).is_err());
        assert!(density_full(1.0, -0.1, 1.0).is_err());
        assert!(killed_kernel(1.0, 0.0, 1.0).is_err());
        assert!(hitting_density(0.0, 1.0).is_err());
        assert!(continuous_mass(-1.0).is_err());
        assert!(resolvent(0.0, StickyParams::left_right()).is_err());
        assert!(exit_survival(1.0, 0.5, 1.0, 1.0, 0.0).is_err());
        assert!(StickyParams::new(-1.0, 1.0).is_err());
        assert!(StickyParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn full_reduces_to_zero_start() {
        for t in [0.01, 0.3, 2.0] {
            for y in [0.0, 0.05, 0.7, 3.0] {
                let (a0, p0) = density_zero(t, y).unwrap();
                let (a1, p1) = density_full(t, 0.0, y).unwrap();
                assert!(close(a0, a1, 1e-12) && close(p0, p1, 1e-12));
            }
        }
    }

    #[test]
    fn far_start_has_no_atom() {
        let (a, _) = density_full(0.01, 5.0, 1.0).unwrap();
        assert!(a < 1e-6 && a <= (-2.0 * SQRT_2 * 5.0).exp());
    }

    #[test]
    fn no_overflow_for_large_y_over_sqrt_t() {
        for (t, y) in [(1e-4, 2.0), (1e-6, 5.0), (0.01, 40.0), (1.0, 300.0)] {
            let p = pdf(t, 0.0, y);
            assert!(p.is_finite() && p >= 0.0, "pdf({t},{y}) = {p}");
            let p = pdf(t, 3.0, y);
            assert!(p.is_finite() && p >= 0.0);
        }
    }

    #[test]
    fn normalization() {
        for t in [1e-4, 0.01, 1.0, 5.0, 10.0] {
            for x in [0.0, 0.5, 2.0] {
                let law = MixedLaw::new(t, x).unwrap();
                assert!(close(law.total_mass(), 1.0, 1e-9), "t={t} x={x}: {}", law.total_mass());
                assert!(law.tail_bound() < 1e-15);
            }
        }
    }

    #[test]
    fn boundary_identity() {
        for t in [0.01, 0.2, 1.0, 4.0] {
            for x in [0.0, 0.5, 2.0] {
                let (a, p) = density_full(t, x, 0.0).unwrap();
                assert!(close(2.0 * SQRT_2 * a, p, 1e-8), "t={t} x={x}");
            }
        }
    }

    #[test]
    fn kernel_value_and_survival() {
        let k = killed_kernel(1.0, 1.0, 1.0).unwrap();
        let expect = (-1.0_f64).exp() / (2.0 * PI).sqrt() * (1.0 - (-2.0_f64).exp());
        assert!(close(k, expect, 1e-15));
        // ∫K dy = 1 - ∫₀^t f
        for (t, x) in [(0.5, 0.3), (1.0, 1.0), (2.0, 0.1)] {
            let mass = quad::integrate_to_inf(|y| if y > 0.0 { kernel(t, x, y) } else { 0.0 }, 0.0, 1e-13, 0.0).value;
            let hit = quad::integrate(|s| if s > 0.0 { hitting_density(s, x).unwrap() } else { 0.0 }, 0.0, t, 1e-13, 0.0).value;
            assert!(close(mass, 1.0 - hit, 1e-8), "{mass} vs {}", 1.0 - hit);
            // closed form: survival of drifted motion from x above 0
            assert!(close(mass, one_sided_survival(t, x, SQRT_2), 1e-10));
        }
    }

    #[test]
    fn hitting_mass_and_mode() {
        for x in [0.05, 0.5, 1.0, 2.0] {
            let m = quad::integrate_to_inf(|s| if s > 0.0 { hitting_density(s, x).unwrap() } else { 0.0 }, 0.0, 1e-14, 0.0).value;
            assert!(close(m, (-2.0 * SQRT_2 * x).exp(), 1e-8), "x={x}: {m}");
        }
        let m = quad::integrate_to_inf(|s| if s > 0.0 { hitting_density(s, 1e-4).unwrap() } else { 0.0 }, 0.0, 1e-14, 0.0).value;
        assert!(m > 0.999);
        let mut best = (0.0, 0.0);
        for i in 1..20_000 {
            let s = i as f64 * 1e-4;
            let f = hitting_density(s, 1.0).unwrap();
            if f > best.1 {
                best = (s, f);
            }
        }
        assert!(best.0 < 1.0 / SQRT_2, "mode at {}", best.0);
    }

    #[test]
    fn resolvent_left_right() {
        let r = resolvent(1.0, StickyParams::left_right()).unwrap();
        assert!(close(1.0 / r.atom_coeff, 3.0 + 2.0 * SQRT_2, 1e-13));
        assert!(close(r.atom_coeff, 0.1715728752538099, 1e-15));
        assert!(close(r.exp_rate, 2.0 - SQRT_2, 1e-15));
        for l in [0.5, 1.0, 2.0] {
            let r = resolvent(l, StickyParams::left_right()).unwrap();
            assert!(close(r.atom_coeff, 1.0 / (l + 2.0 * (l + 1.0_f64).sqrt() + 2.0), 1e-15));
        }
    }

    #[test]
    fn resolvent_driftless() {
        let th = 0.7;
        let l = 1.3;
        let r = resolvent(l, StickyParams::new(0.0, th).unwrap()).unwrap();
        let s = (2.0 * l).sqrt();
        assert!(close(l * r.cont_coeff, 2.0 * th * l / (l + th * s), 1e-14));
        assert!(close(r.exp_rate, s, 1e-14));
    }

    #[test]
    fn continuous_mass_values() {
        let c = continuous_mass(0.01).unwrap();
        assert!(close(c, 0.206428, 1e-6));
        assert!(close(c, 1.0 - atom(0.01, 0.0), 1e-12));
        let r = continuous_mass(1e-10).unwrap() / 1e-5;
        assert!(close(r, 4.0 * FRAC_1_SQRT_PI, 1e-4));
        assert!(close(continuous_mass(60.0).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn images_and_spectral_agree() {
        for (t, x, w, nu) in [(1.0, 0.3, 1.0, 0.0), (0.7, 0.5, 2.0, SQRT_2), (2.0, 0.1, 1.5, -1.0), (3.0, 1.2, 1.3, SQRT_2)] {
            let a = survival_images(t, x, w, nu);
            let b = survival_spectral(t, x, w, nu);
            assert!(close(a, b, 1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn exit_survival_edges() {
        assert_eq!(exit_survival(1.0, 0.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(exit_survival(1.0, 1.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
        // wide upper barrier reduces to one-sided survival: erf(z/√2) for standard BM
        let v = exit_survival(1.0, 1.0, 0.0, 60.0, 0.0).unwrap();
        assert!(close(v, erf(1.0 / SQRT_2), 1e-12));
        let v = exit_survival(1.0, 1.0, 0.0, f64::INFINITY, 0.0).unwrap();
        assert!(close(v, erf(1.0 / SQRT_2), 1e-14));
    }

    #[test]
    fn limit_constant_closed_form() {
        let c = limit_constant();
        assert!(close(c, 4.0 * (SQRT_2 - 1.0) * FRAC_1_SQRT_PI, 1e-12), "{c}");
        assert!(close(c, limit_constant_tol(5e-15), 1e-10));
        assert_eq!(limit_integrand(0.0, 1.0), 0.0);
        let tail = quad::integrate(|z| limit_integrand(z, 1.0), 8.0, 40.0, 1e-20, 0.0).value;
        assert!(tail < 1e-12);
    }

    #[test]
    fn erf_z_integrand_is_a_different_number() {
        let c = quad::integrate_breaks(|z| limit_integrand(z, 1.0), &[0.0, 1.0, 4.0, 40.0], 1e-14, 0.0).value;
        assert!(close(c, 1.168184074164953, 1e-10));
    }
}
