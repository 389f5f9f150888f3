//! Error-function family used by the closed-form Gaussian linearisations.
//!
//! `erf`/`erfc` come from `libm` (the FreeBSD msun port, accurate to about
//! one ulp). The scaled complement `erfcx(x) = exp(x^2) erfc(x)` is needed in
//! regimes where `erfc` underflows while `exp(x^2)` overflows, so it gets its
//! own evaluation: a product with an exactly split `x^2` for moderate
//! arguments and the Laplace continued fraction in the tail.

use std::f64::consts::PI;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Switch-over point between the product form and the continued fraction.
const CF_THRESHOLD: f64 = 5.0;

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        // erfcx(-x) = 2 exp(x^2) - erfcx(x)
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x < CF_THRESHOLD {
        return exp_square(x) * erfc(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    continued_fraction(x)
}

/// `exp(x^2)` with the rounding error of `x*x` folded back in.
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    hi.exp() * (1.0 + lo)
}

/// erfc(x) e^{x^2} = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn continued_fraction(x: f64) -> f64 {
    let terms = if x < 8.0 { 120 } else if x < 30.0 { 60 } else { 20 };
    let mut tail = x;
    for n in (1..=terms).rev() {
        tail = x + (n as f64 * 0.5) / tail;
    }
    1.0 / (PI.sqrt() * tail)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via `erfc`, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Largest argument handled by the polynomial sine; beyond it (and for
/// non-finite input) `f64::sin` is used.
const SIN_POLY_LIMIT: f64 = 1.0e6;

/// 1.5 * 2^52: adding and subtracting rounds to the nearest integer.
const ROUND_SHIFT: f64 = 6_755_399_441_055_744.0;

// pi split so that k * PI_A and k * PI_B are exact for |k| < 2^24.
const PI_A: f64 = 3.141_592_502_593_994_140_62;
const PI_B: f64 = 1.509_957_883_172_319_270_672e-7;
const PI_C: f64 = 1.078_060_571_631_623_810_58e-14;

/// Taylor coefficients (-1)^j / (2j+1)! for j = 1..=10.
const SIN_COEFFS: [f64; 10] = [
    -1.0 / 6.0,
    1.0 / 120.0,
    -1.0 / 5040.0,
    1.0 / 362_880.0,
    -1.0 / 39_916_800.0,
    1.0 / 6_227_020_800.0,
    -1.0 / 1_307_674_368_000.0,
    1.0 / 355_687_428_096_000.0,
    -1.0 / 121_645_100_408_832_000.0,
    1.0 / 51_090_942_171_709_440_000.0,
];

/// Branch-free sine for `|x| <= SIN_POLY_LIMIT`: reduction by multiples of
/// pi, then an odd polynomial on [-pi/2, pi/2]. Vectorises when mapped over
/// a slice.
#[inline(always)]
fn sin_poly(x: f64) -> f64 {
    let shifted = x.mul_add(std::f64::consts::FRAC_1_PI, ROUND_SHIFT);
    let k = shifted - ROUND_SHIFT;
    let odd = shifted.to_bits() << 63;
    let r = (-k).mul_add(PI_C, (-k).mul_add(PI_B, (-k).mul_add(PI_A, x)));
    let z = r * r;
    let mut p = SIN_COEFFS[9];
    for &c in SIN_COEFFS[..9].iter().rev() {
        p = p.mul_add(z, c);
    }
    let s = (r * z).mul_add(p, r).copysign(r);
    f64::from_bits(s.to_bits() ^ odd)
}

/// Sine used for network evaluation.
#[inline]
pub fn sin(x: f64) -> f64 {
    if x.abs() <= SIN_POLY_LIMIT {
        sin_poly(x)
    } else {
        x.sin()
    }
}

/// In-place [`sin`] over a slice; same results, vectorised fast path.
pub fn sin_slice(xs: &mut [f64]) {
    if xs.iter().all(|x| x.abs() <= SIN_POLY_LIMIT) {
        for x in xs.iter_mut() {
            *x = sin_poly(*x);
        }
    } else {
        for x in xs.iter_mut() {
            *x = sin(*x);
        }
    }
}

const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;

/// 1/n! for n = 2..=13.
const EXPM1_COEFFS: [f64; 12] = [
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40_320.0,
    1.0 / 362_880.0,
    1.0 / 3_628_800.0,
    1.0 / 39_916_800.0,
    1.0 / 479_001_600.0,
    1.0 / 6_227_020_800.0,
];

/// `exp(x) - 1` for `-60 <= x <= 0`, branch-free.
#[inline(always)]
fn expm1_nonpositive(x: f64) -> f64 {
    let shifted = x.mul_add(std::f64::consts::LOG2_E, ROUND_SHIFT);
    let k = shifted - ROUND_SHIFT;
    let ki = shifted.to_bits() as i64 - ROUND_SHIFT.to_bits() as i64;
    let r = (-k).mul_add(LN2_LO, (-k).mul_add(LN2_HI, x));
    let mut p = EXPM1_COEFFS[11];
    for &c in EXPM1_COEFFS[..11].iter().rev() {
        p = p.mul_add(r, c);
    }
    let q = (r * r).mul_add(p, r);
    let two_k = f64::from_bits(((ki + 1023) as u64) << 52);
    two_k.mul_add(q, two_k - 1.0)
}

/// ELU with unit scale, as used for network evaluation.
#[inline(always)]
pub fn elu(x: f64) -> f64 {
    let neg = expm1_nonpositive(x.max(-60.0).min(0.0));
    let y = if x > 0.0 { x } else { neg };
    if x.is_nan() {
        x
    } else {
        y
    }
}

pub fn elu_slice(xs: &mut [f64]) {
    for x in xs.iter_mut() {
        *x = elu(*x);
    }
}
