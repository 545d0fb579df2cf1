//! Beta and Gaussian distribution functions.

use libm::{erfc, lgamma};

use crate::error::{invalid, Result};

const CF_MAX_ITER: usize = 2000;
const CF_EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const QUANTILE_MAX_ITER: usize = 200;

fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

fn check_shape(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return invalid(format!("beta parameters must be positive, got a={a}, b={b}"));
    }
    Ok(())
}

/// Regularized incomplete beta function `I_x(a, b)`, i.e. the CDF of `Beta(a, b)` at `x`.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return invalid(format!("beta_cdf argument {x} outside [0, 1]"));
    }
    Ok(beta_cdf_unchecked(x, a, b))
}

pub(crate) fn beta_cdf_unchecked(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // continued fraction converges fast below the mean; reflect above it
    if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - incomplete_cf(1.0 - x, b, a)
    } else {
        incomplete_cf(x, a, b)
    }
}

fn incomplete_cf(x: f64, a: f64, b: f64) -> f64 {
    let front = (a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b)).exp() / a;
    front * lentz(x, a, b)
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn lentz(x: f64, a: f64, b: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let clamp = |v: f64| if v.abs() < FPMIN { FPMIN } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

/// Quantile of `Beta(a, b)`: the `x` with `beta_cdf(x; a, b) = q`.
///
/// Safeguarded Newton iteration inside a shrinking bisection bracket.
pub fn beta_quantile(q: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&q) {
        return invalid(format!("quantile level {q} outside [0, 1]"));
    }
    Ok(beta_quantile_unchecked(q, a, b))
}

pub(crate) fn beta_quantile_unchecked(q: f64, a: f64, b: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = initial_guess(q, a, b);
    for _ in 0..QUANTILE_MAX_ITER {
        let f = beta_cdf_unchecked(x, a, b) - q;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = beta_ln_pdf(x, a, b).exp();
        let newton = x - f / pdf;
        let next = if pdf.is_finite() && pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

fn initial_guess(q: f64, a: f64, b: f64) -> f64 {
    // lower tail: I_x(a,b) ~ x^a / (a B(a,b)); upper tail by reflection
    let mean = a / (a + b);
    let lower = ((q.ln() + a.ln() + ln_beta(a, b)) / a).exp();
    let upper = 1.0 - (((1.0 - q).ln() + b.ln() + ln_beta(a, b)) / b).exp();
    let guess = if lower < mean {
        lower
    } else if upper > mean {
        upper
    } else {
        mean
    };
    if guess > 0.0 && guess < 1.0 {
        guess
    } else {
        mean
    }
}

/// Upper tail `1 - Phi(z)` of the standard normal distribution.
pub fn gaussian_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of [`gaussian_tail`] on `(0, 1)`.
pub fn gaussian_tail_inv(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("gaussian_tail_inv needs q in (0, 1), got {q}"));
    }
    Ok(gaussian_tail_inv_unchecked(q))
}

pub(crate) fn gaussian_tail_inv_unchecked(q: f64) -> f64 {
    let mut z = -acklam_quantile(q);
    // Halley polishing against the tail itself
    for _ in 0..3 {
        let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density <= 0.0 {
            break;
        }
        let u = (gaussian_tail(z) - q) / density;
        z += u / (1.0 - 0.5 * z * u);
    }
    z
}

/// Acklam's rational approximation of the standard normal quantile (relative error ~1e-9).
fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const LOW: f64 = 0.02425;
    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    if p < LOW {
        tail(p)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}
