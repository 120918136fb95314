//! Error-function family used by the closed-form densities.
//!
//! `erf`/`erfc` follow the classic FreeBSD/Sun rational approximations
//! (five argument ranges, each accurate to well under one ulp). `erfcx`
//! reuses the same rational fits: on `[1.25, 28)` the fdlibm form
//! `erfc(x) = exp(-x² - 0.5625 + R/S) / x` turns into
//! `erfcx(x) = exp(-0.5625 + R/S) / x` with no large exponentials at all,
//! which is what lets `e^{2√2 y} erfc(y/√(2t) + √t)` be evaluated for any
//! `y/√t` without overflow.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1/√π`.
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

const ERX: f64 = 8.45062911510467529297e-01;
// erf on [0, 0.84375]
const EFX8: f64 = 1.02703333676410069053e+00;
const PP0: f64 = 1.28379167095512558561e-01;
const PP1: f64 = -3.25042107247001499370e-01;
const PP2: f64 = -2.84817495755985104766e-02;
const PP3: f64 = -5.77027029648944159157e-03;
const PP4: f64 = -2.37630166566501626084e-05;
const QQ1: f64 = 3.97917223959155352819e-01;
const QQ2: f64 = 6.50222499887672944485e-02;
const QQ3: f64 = 5.08130628187576562776e-03;
const QQ4: f64 = 1.32494738004321644526e-04;
const QQ5: f64 = -3.96022827877536812320e-06;
// erf on [0.84375, 1.25]
const PA0: f64 = -2.36211856075265944077e-03;
const PA1: f64 = 4.14856118683748331666e-01;
const PA2: f64 = -3.72207876035701323847e-01;
const PA3: f64 = 3.18346619901161753674e-01;
const PA4: f64 = -1.10894694282396677476e-01;
const PA5: f64 = 3.54783043256182359371e-02;
const PA6: f64 = -2.16637559486879084300e-03;
const QA1: f64 = 1.06420880400844228286e-01;
const QA2: f64 = 5.40397917702171048937e-01;
const QA3: f64 = 7.18286544141962662868e-02;
const QA4: f64 = 1.26171219808761642112e-01;
const QA5: f64 = 1.36370839120290507362e-02;
const QA6: f64 = 1.19844998467991074170e-02;
// erfc on [1.25, 1/0.35]
const RA0: f64 = -9.86494403484714822705e-03;
const RA1: f64 = -6.93858572707181764372e-01;
const RA2: f64 = -1.05586262253232909814e+01;
const RA3: f64 = -6.23753324503260060396e+01;
const RA4: f64 = -1.62396669462573470355e+02;
const RA5: f64 = -1.84605092906711035994e+02;
const RA6: f64 = -8.12874355063065934246e+01;
const RA7: f64 = -9.81432934416914548592e+00;
const SA1: f64 = 1.96512716674392571292e+01;
const SA2: f64 = 1.37657754143519042600e+02;
const SA3: f64 = 4.34565877475229228821e+02;
const SA4: f64 = 6.45387271733267880336e+02;
const SA5: f64 = 4.29008140027567833386e+02;
const SA6: f64 = 1.08635005541779435134e+02;
const SA7: f64 = 6.57024977031928170135e+00;
const SA8: f64 = -6.04244152148580987438e-02;
// erfc on [1/0.35, 28]
const RB0: f64 = -9.86494292470009928597e-03;
const RB1: f64 = -7.99283237680523006574e-01;
const RB2: f64 = -1.77579549177547519889e+01;
const RB3: f64 = -1.60636384855821916062e+02;
const RB4: f64 = -6.37566443368389627722e+02;
const RB5: f64 = -1.02509513161107724954e+03;
const RB6: f64 = -4.83519191608651397019e+02;
const SB1: f64 = 3.03380607434824582924e+01;
const SB2: f64 = 3.25792512996573918826e+02;
const SB3: f64 = 1.53672958608443695994e+03;
const SB4: f64 = 3.19985821950859553908e+03;
const SB5: f64 = 2.55305040643316442583e+03;
const SB6: f64 = 4.74528541206955367215e+02;
const SB7: f64 = -2.24409524465858183362e+01;

#[inline]
fn high_word(x: f64) -> u32 {
    (x.to_bits() >> 32) as u32
}

#[inline]
fn small_ratio(z: f64) -> f64 {
    let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
    let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
    r / s
}

/// `erf(|x|) - ERX` on `[0.84375, 1.25)`.
#[inline]
fn near_one(ax: f64) -> f64 {
    let s = ax - 1.0;
    let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
    let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
    p / q
}

/// Exponent correction `-0.5625 + R/S` of the asymptotic range, valid for
/// `1.25 <= ax < 28`.
#[inline]
fn tail_exponent(ax: f64) -> f64 {
    let s = 1.0 / (ax * ax);
    let (r, big_s) = if ax < 1.0 / 0.35 {
        (
            RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
            1.0 + s
                * (SA1
                    + s * (SA2 + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
        )
    } else {
        (
            RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
            1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
        )
    };
    -0.5625 + r / big_s
}

/// `erfc(ax)` for `1.25 <= ax < 28`.
#[inline]
fn erfc_tail(ax: f64) -> f64 {
    // Split ax*ax so the large exponential is computed from an exact square.
    let z = f64::from_bits(ax.to_bits() & 0xffff_ffff_0000_0000);
    let corr = tail_exponent(ax) + 0.5625;
    (-z * z - 0.5625).exp() * ((z - ax) * (z + ax) + corr).exp() / ax
}

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let ix = high_word(x) & 0x7fff_ffff;
    let ax = x.abs();
    if ix < 0x3feb_0000 {
        if ix < 0x3e30_0000 {
            return 0.125 * (8.0 * x + EFX8 * x);
        }
        return x + x * small_ratio(x * x);
    }
    let y = if ix < 0x3ff4_0000 {
        ERX + near_one(ax)
    } else if ix < 0x4018_0000 {
        1.0 - erfc_tail(ax)
    } else {
        1.0
    };
    y.copysign(x)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let ix = high_word(x) & 0x7fff_ffff;
    let neg = x < 0.0;
    let ax = x.abs();
    if ix < 0x3feb_0000 {
        if ix < 0x3c70_0000 {
            return 1.0 - x;
        }
        let y = small_ratio(x * x);
        if neg || ix < 0x3fd0_0000 {
            return 1.0 - (x + x * y);
        }
        return 0.5 - (x - 0.5 + x * y);
    }
    if ix < 0x3ff4_0000 {
        let p = near_one(ax);
        return if neg { 1.0 + ERX + p } else { 1.0 - ERX - p };
    }
    if ix < 0x403c_0000 {
        let t = erfc_tail(ax);
        return if neg { 2.0 - t } else { t };
    }
    if neg {
        2.0
    } else {
        0.0
    }
}

/// Scaled complementary error function `e^{x²} erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    if x < 0.0 {
        // Overflows to +inf below about -26.6, as e^{x²} does.
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 1.25 {
        return (x * x).exp() * erfc(x);
    }
    if x < 28.0 {
        return tail_exponent(x).exp() / x;
    }
    // Asymptotic series 1/(x√π) Σ (-1)^k (2k-1)!! / (2x²)^k; ten terms are
    // past double precision for x >= 28.
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..10 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum * FRAC_1_SQRT_PI / x
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `e^a Φ(z)` without forming `e^a` when `Φ(z)` is tiny.
pub fn exp_norm_cdf(a: f64, z: f64) -> f64 {
    if z < -1.0 {
        0.5 * (a - 0.5 * z * z).exp() * erfcx(-z * FRAC_1_SQRT_2)
    } else {
        a.exp() * norm_cdf(z)
    }
}
