use std::f64::consts::{FRAC_PI_2, PI};

use crate::inr::Activation;

/// Linear approximation `f(x) ~ alpha * x + beta` with `|error| <= gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearApprox {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Widest interval on which the chord-slope candidate is tried for sine.
const SINE_CHORD_MAX_WIDTH: f64 = 4.0 * PI;

/// Minimax (Chebyshev) linear approximation of `act` on `[lo, hi]`.
///
/// For a candidate slope `alpha` the error `e(x) = f(x) - alpha x` is extremal
/// at the endpoints or where `f'(x) = alpha`; centring `beta` between the
/// extreme values of `e` makes the error equioscillate with amplitude
/// `gamma`. The chord slope is optimal for convex or concave pieces. For sine
/// over an interval with an inflection the constant approximation is also
/// tried and the smaller `gamma` wins.
pub fn minimax_approx(act: Activation, lo: f64, hi: f64) -> LinearApprox {
    debug_assert!(lo <= hi, "minimax_approx on [{lo}, {hi}]");
    let f = |x: f64| activation_exact(act, x);
    if !(lo < hi) {
        return LinearApprox { alpha: 0.0, beta: f(lo), gamma: 0.0 };
    }
    match act {
        Activation::Relu => {
            if hi <= 0.0 {
                return LinearApprox { alpha: 0.0, beta: 0.0, gamma: 0.0 };
            }
            if lo >= 0.0 {
                return LinearApprox { alpha: 1.0, beta: 0.0, gamma: 0.0 };
            }
            let alpha = hi / (hi - lo);
            equioscillate(f, alpha, lo, hi, &[0.0])
        }
        Activation::Elu => {
            if lo >= 0.0 {
                return LinearApprox { alpha: 1.0, beta: 0.0, gamma: 0.0 };
            }
            let alpha = (f(hi) - f(lo)) / (hi - lo);
            let crit = if alpha > 0.0 && alpha < 1.0 { Some(alpha.ln()) } else { None };
            equioscillate(f, alpha, lo, hi, crit.as_slice())
        }
        Activation::Sine => {
            let constant = sine_constant(lo, hi);
            if hi - lo > SINE_CHORD_MAX_WIDTH {
                return constant;
            }
            let alpha = ((f(hi) - f(lo)) / (hi - lo)).clamp(-1.0, 1.0);
            let a = alpha.acos();
            let mut crit = Vec::new();
            for base in [a, -a] {
                let k0 = ((lo - base) / (2.0 * PI)).ceil() as i64;
                let k1 = ((hi - base) / (2.0 * PI)).floor() as i64;
                for k in k0..=k1 {
                    crit.push(base + 2.0 * PI * k as f64);
                }
            }
            let chord = equioscillate(f, alpha, lo, hi, &crit);
            if constant.gamma < chord.gamma {
                constant
            } else {
                chord
            }
        }
    }
}

/// The activation evaluated with the standard library functions, used for
/// analysis (the network itself uses the vectorised kernels, which agree to
/// within an ulp; see [`rounding_pad`]).
pub(crate) fn activation_exact(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Sine => x.sin(),
        Activation::Relu => x.max(0.0),
        Activation::Elu => {
            if x > 0.0 {
                x
            } else {
                x.exp_m1()
            }
        }
    }
}

/// Absolute slack covering rounding in the evaluation of `f` and of
/// `alpha * x + beta`.
fn rounding_pad(alpha: f64, beta: f64, lo: f64, hi: f64, fmax: f64) -> f64 {
    8.0 * f64::EPSILON * (fmax + alpha.abs() * lo.abs().max(hi.abs()) + beta.abs())
}

fn equioscillate(
    f: impl Fn(f64) -> f64,
    alpha: f64,
    lo: f64,
    hi: f64,
    critical: &[f64],
) -> LinearApprox {
    let mut emax = f64::NEG_INFINITY;
    let mut emin = f64::INFINITY;
    let mut fmax: f64 = 0.0;
    let points = [lo, hi];
    for &x in points.iter().chain(critical.iter().filter(|&&x| x > lo && x < hi)) {
        let fx = f(x);
        fmax = fmax.max(fx.abs());
        let e = fx - alpha * x;
        emax = emax.max(e);
        emin = emin.min(e);
    }
    let beta = 0.5 * (emax + emin);
    let gamma = 0.5 * (emax - emin) + rounding_pad(alpha, beta, lo, hi, fmax);
    LinearApprox { alpha, beta, gamma }
}

/// Constant approximation from the exact extrema of sine on `[lo, hi]`.
fn sine_constant(lo: f64, hi: f64) -> LinearApprox {
    let (mut m, mut mm) = (lo.sin().min(hi.sin()), lo.sin().max(hi.sin()));
    let k0 = ((lo - FRAC_PI_2) / PI).ceil() as i64;
    let k1 = ((hi - FRAC_PI_2) / PI).floor() as i64;
    if k1 >= k0 {
        if k1 > k0 {
            m = -1.0;
            mm = 1.0;
        } else if k0.rem_euclid(2) == 0 {
            mm = 1.0;
        } else {
            m = -1.0;
        }
    }
    let beta = 0.5 * (mm + m);
    let gamma = 0.5 * (mm - m) + rounding_pad(0.0, beta, lo, hi, 1.0);
    LinearApprox { alpha: 0.0, beta, gamma }
}
