//! Closed-form least-squares linearisation of the activations under a
//! Gaussian input `X ~ N(mu, sigma^2)`:
//!
//! `(alpha, beta) = argmin E[(f(X) - alpha X - beta)^2]`, which gives
//! `alpha = Cov(f(X), X) / sigma^2 = E[f'(X)]`, `beta = E[f(X)] - alpha mu`,
//! and residual variance `gamma^2 = Var f(X) - alpha^2 sigma^2`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};
use crate::inr::Activation;
use crate::special::{erfc, erfcx, normal_pdf};

use super::GaussianEstimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqApprox {
    pub alpha: f64,
    pub beta: f64,
    /// Residual variance; the fresh random variable gets coefficient
    /// `gamma_sq.sqrt()`.
    pub gamma_sq: f64,
}

/// Below this many units of `max(1, |mu|)` the input is treated as a point.
const POINT_SIGMA: f64 = 1e-7;
/// Negative rounding noise in `gamma_sq` tolerated (and clamped to zero).
const GAMMA_SQ_NOISE: f64 = 1e-12;

pub fn lsq_approx(act: Activation, input: GaussianEstimate) -> Result<LsqApprox> {
    let GaussianEstimate { mu, sigma } = input;
    if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lsq_approx needs finite mu and non-negative finite sigma, got ({mu}, {sigma})"
        )));
    }
    if sigma < POINT_SIGMA * mu.abs().max(1.0) {
        return Ok(tangent(act, mu));
    }
    let (alpha, beta, gamma_sq) = match act {
        Activation::Relu => relu(mu, sigma),
        Activation::Sine => sine(mu, sigma),
        Activation::Elu => elu(mu, sigma),
    };
    let gamma_sq = if gamma_sq < 0.0 && gamma_sq >= -GAMMA_SQ_NOISE {
        0.0
    } else {
        gamma_sq
    };
    if !(gamma_sq >= 0.0 && alpha.is_finite() && beta.is_finite() && gamma_sq.is_finite()) {
        return Err(Error::InternalConsistency(format!(
            "{act} linearisation at mu={mu}, sigma={sigma} gave alpha={alpha}, beta={beta}, gamma^2={gamma_sq}"
        )));
    }
    Ok(LsqApprox { alpha, beta, gamma_sq })
}

fn tangent(act: Activation, mu: f64) -> LsqApprox {
    let (f, df) = match act {
        Activation::Sine => (mu.sin(), mu.cos()),
        Activation::Relu if mu == 0.0 => (0.0, 0.5),
        Activation::Relu if mu > 0.0 => (mu, 1.0),
        Activation::Relu => (0.0, 0.0),
        Activation::Elu if mu > 0.0 => (mu, 1.0),
        Activation::Elu => (mu.exp_m1(), mu.exp()),
    };
    LsqApprox { alpha: df, beta: f - df * mu, gamma_sq: 0.0 }
}

fn relu(mu: f64, sigma: f64) -> (f64, f64, f64) {
    let m = mu / sigma;
    let p = 0.5 * erfc(-m * FRAC_1_SQRT_2);
    let q = 0.5 * erfc(m * FRAC_1_SQRT_2);
    let phi = normal_pdf(m);
    let alpha = p;
    let beta = sigma * phi;
    let gamma_sq = sigma * sigma * ((m * m + 1.0) * p * q + m * phi * (q - p) - phi * phi);
    (alpha, beta, gamma_sq)
}

fn sine(mu: f64, sigma: f64) -> (f64, f64, f64) {
    let s = sigma * sigma;
    let a = (-0.5 * s).exp();
    let (sin_mu, cos_mu) = mu.sin_cos();
    let alpha = a * cos_mu;
    let beta = a * sin_mu - alpha * mu;
    let one_minus = -(-s).exp_m1();
    let gamma_sq = 0.5 * one_minus * one_minus * sin_mu * sin_mu + cos_mu * cos_mu * sine_h(s);
    (alpha, beta, gamma_sq)
}

/// `h(s) = (1 - e^{-2s})/2 - s e^{-s}`, which starts at `s^3/6`.
fn sine_h(s: f64) -> f64 {
    if s >= 0.5 {
        return -0.5 * (-2.0 * s).exp_m1() - s * (-s).exp();
    }
    // sum_k (-1)^(k+1) (2^(k-1) - k) s^k / k!, k >= 3
    let mut sum = 0.0;
    let mut pow_over_fact = s * s / 2.0;
    let mut two_pow = 2.0;
    for k in 3..40 {
        pow_over_fact *= s / k as f64;
        two_pow *= 2.0;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (two_pow - k as f64) * pow_over_fact;
    }
    sum
}

/// `E[exp(kX) 1{side * X < 0}]`-type tail: `exp(k mu + k^2 s^2 / 2) *
/// erfc(w) / 2` with `w = side (mu + k s^2) / (sqrt 2 s)`, evaluated through
/// `erfcx` when `w > 0` so that neither factor overflows.
fn exp_tail(k: f64, side: f64, mu: f64, sigma: f64) -> f64 {
    let w = side * (mu + k * sigma * sigma) / (SQRT_2 * sigma);
    if w > 0.0 {
        0.5 * erfcx(w) * (-(mu * mu) / (2.0 * sigma * sigma)).exp()
    } else {
        0.5 * (k * mu + 0.5 * k * k * sigma * sigma).exp() * erfc(w)
    }
}

fn elu(mu: f64, sigma: f64) -> (f64, f64, f64) {
    let s2 = sigma * sigma;
    let m = mu / sigma;
    let c = normal_pdf(m);
    if mu < 0.0 && mu + s2 < 0.0 {
        // f = (e^x - 1) - k(x), k = (e^x - 1 - x) 1{x > 0}: the linear part
        // x has little mass, so expand around the exponential.
        let q = 0.5 * erfc(-m * FRAC_1_SQRT_2);
        let f1 = exp_tail(1.0, -1.0, mu, sigma);
        let f2 = exp_tail(2.0, -1.0, mu, sigma);
        let m1 = (mu + 0.5 * s2).exp();
        let ek = f1 - (1.0 + mu) * q - sigma * c;
        let ek2 = f2 + (1.0 + 2.0 * mu + mu * mu + s2) * q + mu * sigma * c
            - 2.0 * (1.0 + mu + s2) * f1;
        let exk = f2 - f1 - ((mu + s2) * f1 + sigma * c);
        let cov_uk = exk - m1 * ek;
        let dk = f1 - q;
        let resvar_u = (2.0 * mu + s2).exp() * expm1_minus_x(s2);
        let resvar_k = ek2 - ek * ek - s2 * dk * dk;
        let rescov = cov_uk - m1 * s2 * dk;
        let alpha = m1 - dk;
        let beta = m1 - 1.0 - ek - alpha * mu;
        (alpha, beta, resvar_u + resvar_k - 2.0 * rescov)
    } else if mu >= 0.0 && sigma <= SERIES_SIGMA {
        elu_series(mu, sigma)
    } else {
        // f = x + g, g = (e^x - 1 - x) 1{x < 0}.
        let p = 0.5 * erfc(m * FRAC_1_SQRT_2);
        let e1 = exp_tail(1.0, 1.0, mu, sigma);
        let e2 = exp_tail(2.0, 1.0, mu, sigma);
        let eg = e1 - (1.0 + mu) * p + sigma * c;
        let eg2 = e2 + (1.0 + 2.0 * mu + mu * mu + s2) * p - mu * sigma * c
            - 2.0 * (1.0 + mu + s2) * e1;
        let dg = e1 - p;
        let alpha = 1.0 + dg;
        let beta = eg - dg * mu;
        (alpha, beta, eg2 - eg * eg - s2 * dg * dg)
    }
}

/// Largest sigma for which the power-series form of the ELU moments is used.
const SERIES_SIGMA: f64 = 1.0;
/// Terms kept in the power series; (2 sigma)^n Hh_n(m) is below 1e-20 of the
/// leading term well before this for sigma <= 1.
const SERIES_TERMS: usize = 64;

/// Below this argument the repeated tails are built upward from `Hh_0`.
const FORWARD_LIMIT: f64 = 2.0;

/// `Hh_n(x) = int_x^inf (t - x)^n / n! phi(t) dt` for `n = 0..=n_max`, `x >= 0`,
/// from `n Hh_n = Hh_{n-2} - x Hh_{n-1}`. Upward recursion is used for small
/// `x`; for larger `x` `Hh_n` is the minimal solution, so the ratios
/// `Hh_n / Hh_{n-1}` come from running `r_{n-1} = 1 / (x + n r_n)` downward.
fn repeated_normal_tail(x: f64, n_max: usize) -> Vec<f64> {
    if x < FORWARD_LIMIT {
        tail_upward(x, n_max)
    } else {
        tail_downward(x, n_max)
    }
}

fn tail_upward(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let (mut prev, mut cur) = (normal_pdf(x), 0.5 * erfc(x * FRAC_1_SQRT_2));
    out.push(cur);
    for n in 1..=n_max {
        let next = (prev - x * cur) / n as f64;
        out.push(next);
        (prev, cur) = (cur, next);
    }
    out
}

fn tail_downward(x: f64, n_max: usize) -> Vec<f64> {
    let top = n_max + 200;
    let mut r = 1.0 / (x + (top as f64).sqrt());
    let mut ratios = vec![0.0; n_max + 1];
    for n in (1..=top).rev() {
        if n <= n_max {
            ratios[n] = r;
        }
        r = 1.0 / (x + n as f64 * r);
    }
    let mut out = Vec::with_capacity(n_max + 1);
    let mut h = 0.5 * erfc(x * FRAC_1_SQRT_2);
    out.push(h);
    for &r in &ratios[1..] {
        h *= r;
        out.push(h);
    }
    out
}

/// ELU moments for `mu >= 0` through `g(x) = sum_{n>=2} x^n / n!` on `x < 0`.
/// With `E[(-X)^n; X < 0] = n! sigma^n Hh_n(mu / sigma)` every term is a
/// small positive tail quantity, so nothing cancels even when the mass below
/// zero is tiny.
fn elu_series(mu: f64, sigma: f64) -> (f64, f64, f64) {
    let hh = repeated_normal_tail(mu / sigma, SERIES_TERMS + 1);
    // t[n] = E[X^n; X < 0] / n! = (-sigma)^n Hh_n(m)
    let mut t = Vec::with_capacity(hh.len());
    let mut pow = 1.0;
    for &h in &hh {
        t.push(pow * h);
        pow *= -sigma;
    }
    let (mut eg, mut dg, mut eg2) = (0.0, 0.0, 0.0);
    let mut two_n = 1.0;
    for n in 0..=SERIES_TERMS {
        if n >= 2 {
            eg += t[n];
        }
        if n >= 1 {
            // g'(x) = e^x - 1
            dg += t[n];
        }
        if n >= 4 {
            // E[g^2; X < 0]: sum over a + b = n, a, b >= 2, of 1 / (a! b!)
            eg2 += (two_n - 2.0 - 2.0 * n as f64) * t[n];
        }
        two_n *= 2.0;
    }
    let alpha = 1.0 + dg;
    let beta = eg - dg * mu;
    let gamma_sq = eg2 - eg * eg - sigma * sigma * dg * dg;
    (alpha, beta, gamma_sq)
}

/// `e^s - 1 - s`, accurate for small `s`.
fn expm1_minus_x(s: f64) -> f64 {
    if s > 0.1 {
        return s.exp_m1() - s;
    }
    let mut term = s * s / 2.0;
    let mut sum = term;
    for k in 3..30 {
        term *= s / k as f64;
        sum += term;
    }
    sum
}
