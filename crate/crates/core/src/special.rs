//! Gaussian tail probability Q(x) = P[N(0,1) > x], in linear and log form.
//!
//! Up to `ASYMPTOTIC_FROM` the value comes from the complementary error
//! function; beyond it Q underflows toward the subnormal range and the
//! asymptotic tail series is used instead, evaluated in the log domain so
//! callers probing extreme tails (the gamma recursion) keep full precision.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

const ASYMPTOTIC_FROM: f64 = 37.0;

/// Gaussian tail probability.
pub fn q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= ASYMPTOTIC_FROM {
        0.5 * erfc(x * FRAC_1_SQRT_2)
    } else {
        log_q(x).exp()
    }
}

/// Natural log of Q(x), finite for every finite x.
pub fn log_q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > ASYMPTOTIC_FROM {
        return log_q_tail(x);
    }
    if x < 0.0 {
        return (-q(-x)).ln_1p();
    }
    (0.5 * erfc(x * FRAC_1_SQRT_2)).ln()
}

// Q(x) ~ phi(x)/x * sum_n (-1)^n (2n-1)!! / x^(2n); terms shrink fast for x > 37.
fn log_q_tail(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=8 {
        term *= -((2 * n - 1) as f64) * inv2;
        sum += term;
    }
    -0.5 * x * x - (x * (2.0 * PI).sqrt()).ln() + sum.ln()
}

/// log(e^a + e^b) without overflow; handles -inf operands.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
